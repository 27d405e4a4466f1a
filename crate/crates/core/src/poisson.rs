//! Generalized-Poisson sharp-time distributions on a spatial slice.
//!
//! The Lévy density is
//!
//! `ρ(φ) = J² e^{-2W(φ)} / Π'_k [Σ'_l β_{k-l} φ_l²]^γ`, `γ = 1/2 + ξ/(2N')`,
//!
//! which in `(κ, η)` coordinates carries the radial factor `κ^{-1-ξ}`:
//! `κ^{N'-1}` from the measure over `κ^{2γN'} = κ^{N'+ξ}` from the
//! denominator. Its total mass diverges at small `κ` while every moment of
//! the smeared field `κ Σ' g_k η_k a^s` stays finite when `W` confines.
//!
//! Also: the potential `𝒱 = ½ Y^{-1} a^{-s} Ψ^{-1} Σ ∂²Ψ` of the lattice
//! Hamiltonian for a supplied ground state `Ψ` on a grid.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypersphere::{fill_uniform_direction, sphere_delta_measure};
use crate::lattice::SpatialSliceGeometry;
use crate::quadrature::{
    try_integrate, try_integrate_from_origin, try_integrate_to_infinity, QuadSettings,
};
use crate::rng::stream;
use crate::scaling::{fit_power_law, FitResult};
use crate::stats::{ErrorMethod, Estimate};

/// The large-field function `W`, a sum over slice sites of an even
/// polynomial with `W(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WSpec {
    /// `w Σ' φ_k²`
    Quadratic { w: f64 },
    /// `Σ' Σ_j c_j φ_k^{2(j+1)}`
    EvenPolynomial { coeffs: Vec<f64> },
}

impl Default for WSpec {
    fn default() -> Self {
        WSpec::Quadratic { w: 0.5 }
    }
}

impl WSpec {
    fn coeffs(&self) -> Vec<f64> {
        match self {
            WSpec::Quadratic { w } => vec![*w],
            WSpec::EvenPolynomial { coeffs } => coeffs.clone(),
        }
    }

    fn validate(&self) -> Result<()> {
        let c = self.coeffs();
        if c.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite W coefficient".into()));
        }
        if let Some(lead) = c.iter().rev().find(|x| **x != 0.0) {
            if *lead < 0.0 {
                return Err(Error::InvalidParameter(
                    "leading W coefficient must be positive".into(),
                ));
            }
        }
        Ok(())
    }

    /// Whether `W` grows at large fields (otherwise no moment is finite).
    pub fn confining(&self) -> bool {
        self.coeffs().iter().any(|x| *x != 0.0)
    }

    /// `W(φ)` on Cartesian amplitudes.
    pub fn eval(&self, phi: &[f64]) -> f64 {
        self.coeffs()
            .iter()
            .enumerate()
            .map(|(j, c)| c * phi.iter().map(|p| p.powi(2 * (j as i32 + 1))).sum::<f64>())
            .sum()
    }
}

/// Positive kernel `β` over slice displacements.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BetaSpec {
    /// `β_k ∝ exp(-Σ_j |k_j|)` with minimum-image displacements.
    #[default]
    Exponential,
    /// Explicit positive weights indexed like slice sites (displacement from
    /// the origin); normalised on construction.
    Explicit { weights: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoissonSpec {
    pub xi: f64,
    #[serde(default)]
    pub beta: BetaSpec,
    #[serde(default)]
    pub w: WSpec,
    #[serde(default = "unit")]
    pub j_sq: f64,
    #[serde(default)]
    pub spatial_dim: usize,
    #[serde(default)]
    pub half_extent: usize,
    #[serde(default = "unit")]
    pub spacing: f64,
}

fn unit() -> f64 {
    1.0
}

impl Default for PoissonSpec {
    fn default() -> Self {
        Self {
            xi: 0.5,
            beta: BetaSpec::Exponential,
            w: WSpec::default(),
            j_sq: 1.0,
            spatial_dim: 0,
            half_extent: 0,
            spacing: 1.0,
        }
    }
}

/// Validated parameters with the `β` kernel laid out as a matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonParams {
    xi: f64,
    gamma: f64,
    beta: Vec<f64>,
    kernel: Vec<f64>,
    w: WSpec,
    j_sq: f64,
    slice: SpatialSliceGeometry,
}

impl PoissonSpec {
    pub fn build(&self) -> Result<PoissonParams> {
        if !(self.xi > 0.0 && self.xi < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "xi must lie in (0, 1), got {}",
                self.xi
            )));
        }
        if !(self.j_sq.is_finite() && self.j_sq > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "J^2 must be positive, got {}",
                self.j_sq
            )));
        }
        self.w.validate()?;
        let slice = SpatialSliceGeometry::new(self.spatial_dim, self.half_extent, self.spacing)?;
        let n = slice.sites();
        let raw: Vec<f64> = match &self.beta {
            BetaSpec::Exponential => (0..n)
                .map(|k| {
                    let d: i64 = slice.offset(k, 0).iter().map(|x| x.abs()).sum();
                    (-(d as f64)).exp()
                })
                .collect(),
            BetaSpec::Explicit { weights } => {
                if weights.len() != n {
                    return Err(Error::SizeMismatch {
                        expected: n,
                        actual: weights.len(),
                    });
                }
                if weights.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
                    return Err(Error::InvalidParameter("beta weights must be positive".into()));
                }
                weights.clone()
            }
        };
        let total: f64 = raw.iter().sum();
        let beta: Vec<f64> = raw.iter().map(|b| b / total).collect();
        let mut kernel = vec![0.0; n * n];
        for k in 0..n {
            for l in 0..n {
                kernel[k * n + l] = beta[slice.offset_index(&slice.offset(k, l))];
            }
        }
        Ok(PoissonParams {
            xi: self.xi,
            gamma: 0.5 + self.xi / (2.0 * n as f64),
            beta,
            kernel,
            w: self.w.clone(),
            j_sq: self.j_sq,
            slice,
        })
    }
}

impl PoissonParams {
    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Normalised kernel by displacement index.
    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn slice(&self) -> &SpatialSliceGeometry {
        &self.slice
    }

    pub fn sites(&self) -> usize {
        self.slice.sites()
    }

    pub fn w(&self) -> &WSpec {
        &self.w
    }

    pub fn j_sq(&self) -> f64 {
        self.j_sq
    }

    /// `Π'_k [Σ'_l β_{k-l} v_l²]^{-γ}`
    fn kernel_factor(&self, v: &[f64]) -> Result<f64> {
        let n = self.sites();
        let mut log = 0.0;
        for k in 0..n {
            let s: f64 = (0..n).map(|l| self.kernel[k * n + l] * v[l] * v[l]).sum();
            if !(s > 0.0) {
                return Err(Error::DegenerateInput(format!(
                    "kernel sum vanishes at site {k}"
                )));
            }
            log -= self.gamma * s.ln();
        }
        Ok(log.exp())
    }

    /// `W(κη)` as a polynomial in `κ`: coefficient of `κ^{2(j+1)}`.
    fn radial_w(&self, eta: &[f64]) -> Vec<f64> {
        self.w
            .coeffs()
            .iter()
            .enumerate()
            .map(|(j, c)| c * eta.iter().map(|e| e.powi(2 * (j as i32 + 1))).sum::<f64>())
            .collect()
    }

    /// Cartesian `ρ(φ)`.
    pub fn rho(&self, phi: &[f64]) -> Result<f64> {
        check_len(self.sites(), phi.len())?;
        Ok(self.j_sq * (-2.0 * self.w.eval(phi)).exp() * self.kernel_factor(phi)?)
    }
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::SizeMismatch { expected, actual });
    }
    Ok(())
}

/// `(N' - 1) - 2γN'`: the measure power minus the denominator power.
pub fn radial_exponent(sites: usize, xi: f64) -> f64 {
    let n = sites as f64;
    let gamma = 0.5 + xi / (2.0 * n);
    (n - 1.0) - 2.0 * gamma * n
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoRadialForm {
    /// `e^{-2W(κη)} Π'_k [Σ'_l β_{k-l} η_l²]^{-γ}`
    pub angular_density: f64,
    /// Always `-1 - ξ`.
    pub radial_exponent: f64,
    /// False when `W` does not confine, so no moment is finite.
    pub moments_finite: bool,
}

/// Splits `ρ(κη) κ^{N'-1}` into the angular density and the power of `κ`.
pub fn rho_radial_form(params: &PoissonParams, kappa: f64, eta: &[f64]) -> Result<RhoRadialForm> {
    check_len(params.sites(), eta.len())?;
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::InvalidParameter(format!("kappa must be positive, got {kappa}")));
    }
    let exponent = radial_exponent(params.sites(), params.xi);
    let expected = -1.0 - params.xi;
    assert!(
        (exponent - expected).abs() <= 1e-12 * params.sites() as f64,
        "radial exponent {exponent} != {expected}"
    );
    let w: f64 = params
        .radial_w(eta)
        .iter()
        .enumerate()
        .map(|(j, c)| c * kappa.powi(2 * (j as i32 + 1)))
        .sum();
    Ok(RhoRadialForm {
        angular_density: (-2.0 * w).exp() * params.kernel_factor(eta)?,
        radial_exponent: expected,
        moments_finite: params.w.confining(),
    })
}

/// Angular integration settings: exact `±1` average for `N' = 1`, uniform
/// sphere Monte Carlo with antithetic pairs `(η, -η)` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngularSettings {
    pub quad: QuadSettings,
    pub samples: usize,
    pub seed: u64,
}

impl Default for AngularSettings {
    fn default() -> Self {
        Self {
            quad: QuadSettings::with_tolerance(1e-13, 1e-11),
            samples: 2000,
            seed: 0,
        }
    }
}

/// `∫ dσ(η) f(η)` with `dσ = δ(1 - Ση²) Π dη`; returns per-component
/// `(mean, std_error)`.
fn sphere_integral<F>(
    params: &PoissonParams,
    settings: &AngularSettings,
    f: F,
) -> Result<[(f64, f64); 2]>
where
    F: Fn(&[f64]) -> Result<[f64; 2]> + Sync,
{
    let n = params.sites();
    let total = sphere_delta_measure(n);
    let pair = |eta: &[f64]| -> Result<[f64; 2]> {
        let neg: Vec<f64> = eta.iter().map(|x| -x).collect();
        let a = f(eta)?;
        let b = f(&neg)?;
        Ok([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])])
    };
    if n == 1 {
        let v = pair(&[1.0])?;
        return Ok([(total * v[0], 0.0), (total * v[1], 0.0)]);
    }
    if settings.samples < 2 {
        return Err(Error::InvalidParameter("need at least 2 angular samples".into()));
    }
    let mut rng = stream(settings.seed);
    let dirs: Vec<Vec<f64>> = (0..settings.samples)
        .map(|_| {
            let mut e = vec![0.0; n];
            fill_uniform_direction(&mut e, &mut rng);
            e
        })
        .collect();
    let values: Vec<[f64; 2]> = dirs.par_iter().map(|e| pair(e)).collect::<Result<_>>()?;
    let m = values.len() as f64;
    let mut out = [(0.0, 0.0); 2];
    for (c, slot) in out.iter_mut().enumerate() {
        let mean = values.iter().map(|v| v[c]).sum::<f64>() / m;
        let var = values.iter().map(|v| (v[c] - mean).powi(2)).sum::<f64>() / (m - 1.0);
        *slot = (total * mean, total * (var / m).sqrt());
    }
    Ok(out)
}

fn w_radial(coeffs: &[f64], k: f64) -> f64 {
    let k2 = k * k;
    let mut p = k2;
    let mut s = 0.0;
    for c in coeffs {
        s += c * p;
        p *= k2;
    }
    s
}

/// `∫_0^∞ (1 - e^{iκx}) e^{-2W(κη)} κ^{-1-ξ} dκ` as `(re, im)`.
fn radial_characteristic(x: f64, wc: &[f64], xi: f64, quad: &QuadSettings) -> Result<[f64; 2]> {
    if x == 0.0 {
        return Ok([0.0, 0.0]);
    }
    let integrand = |k: f64, part: usize| -> f64 {
        let damp = (-2.0 * w_radial(wc, k)).exp() * k.powf(-1.0 - xi);
        if part == 0 {
            2.0 * (0.5 * k * x).sin().powi(2) * damp
        } else {
            -(k * x).sin() * damp
        }
    };
    let mut out = [0.0; 2];
    for (part, slot) in out.iter_mut().enumerate() {
        let near = try_integrate_from_origin(|k| Ok(integrand(k, part)), 1.0, -xi, quad)?;
        let far = try_integrate_to_infinity(|k| Ok(integrand(k, part)), 1.0, quad)?;
        *slot = near.value + far.value;
    }
    Ok(out)
}

/// `∫_ε^∞ κ^{power} e^{-2W(κη)} dκ`; `ε = 0` needs `power > -1`.
fn radial_power_integral(power: f64, eps: f64, wc: &[f64], quad: &QuadSettings) -> Result<f64> {
    let f = |k: f64| (-2.0 * w_radial(wc, k)).exp() * k.powf(power);
    let far_start = eps.max(1.0);
    let far = if wc.iter().any(|c| *c != 0.0) || power < -1.0 {
        try_integrate_to_infinity(|k| Ok(f(k)), far_start, quad)?.value
    } else {
        return Err(Error::Divergent(format!(
            "W does not confine: ∫ κ^{power} dκ diverges at large κ"
        )));
    };
    if eps >= 1.0 {
        return Ok(far);
    }
    let near = if eps == 0.0 {
        try_integrate_from_origin(|k| Ok(f(k)), 1.0, power, quad)?.value
    } else {
        // u = ln κ flattens the small-κ power law
        try_integrate(|u| Ok(f(u.exp()) * u.exp()), eps.ln(), 0.0, quad)?.value
    };
    Ok(near + far)
}

fn smeared_argument(params: &PoissonParams, g: &[f64], eta: &[f64]) -> f64 {
    params.slice.spacing().powi(params.slice.spatial_dim() as i32)
        * g.iter().zip(eta).map(|(g, e)| g * e).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicValue {
    pub re: f64,
    pub im: f64,
    /// Monte Carlo error of the modulus (zero for exact angular averages).
    pub error: f64,
}

impl CharacteristicValue {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// `C(g) = exp{-2J² ∫ dσ(η) ∫ dκ [1 - e^{iκ Σ' g_k η_k a^s}] e^{-2W(κη)}
/// Π'[Σ' β η²]^{-γ} κ^{-1-ξ}}`.
pub fn characteristic_functional(
    params: &PoissonParams,
    g: &[f64],
    settings: &AngularSettings,
) -> Result<CharacteristicValue> {
    check_len(params.sites(), g.len())?;
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("test sequence".into()));
    }
    if g.iter().all(|x| *x == 0.0) {
        return Ok(CharacteristicValue {
            re: 1.0,
            im: 0.0,
            error: 0.0,
        });
    }
    let [(re, re_err), (im, im_err)] = sphere_integral(params, settings, |eta| {
        let a = params.kernel_factor(eta)?;
        let r = radial_characteristic(
            smeared_argument(params, g, eta),
            &params.radial_w(eta),
            params.xi,
            &settings.quad,
        )?;
        Ok([a * r[0], a * r[1]])
    })?;
    let scale = 2.0 * params.j_sq;
    let exponent = Complex64::new(-scale * re, -scale * im);
    let c = exponent.exp();
    Ok(CharacteristicValue {
        re: c.re,
        // + 0.0 turns a -0 from exact cancellation into 0
        im: c.im + 0.0,
        error: c.norm() * scale * re_err.hypot(im_err),
    })
}

/// The ε-regularised total mass `∫_{κ>ε} ρ`.
pub fn regularized_total_mass(params: &PoissonParams, eps: f64, settings: &AngularSettings) -> Result<Estimate> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("cutoff must be positive, got {eps}")));
    }
    let [(m, err), _] = sphere_integral(params, settings, |eta| {
        let a = params.kernel_factor(eta)?;
        let r = radial_power_integral(-1.0 - params.xi, eps, &params.radial_w(eta), &settings.quad)?;
        Ok([a * r, 0.0])
    })?;
    let scale = 2.0 * params.j_sq;
    Ok(Estimate {
        mean: scale * m,
        std_error: scale * err,
        n_effective: settings.samples as f64,
        method: ErrorMethod::Naive,
    })
}

/// Fits `∫_{κ>ε} ρ ∝ ε^e`; the divergence gives `e → -ξ`.
pub fn total_mass_divergence_probe(
    params: &PoissonParams,
    epsilons: &[f64],
    settings: &AngularSettings,
) -> Result<FitResult> {
    let (lo, hi) = epsilons
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    if !(hi / lo >= 100.0) {
        return Err(Error::InvalidParameter(
            "cutoffs must span at least two decades".into(),
        ));
    }
    let pts = epsilons
        .iter()
        .map(|&e| Ok((e, regularized_total_mass(params, e, settings)?)))
        .collect::<Result<Vec<_>>>()?;
    fit_power_law(&pts)
}

/// `∫_{κ>ε} (κ Σ' g_k η_k a^s)^order ρ`; `cutoff = 0` removes the cutoff.
pub fn smeared_moment(
    params: &PoissonParams,
    g: &[f64],
    order: u32,
    cutoff: f64,
    settings: &AngularSettings,
) -> Result<Estimate> {
    check_len(params.sites(), g.len())?;
    if !(order == 1 || order == 2) {
        return Err(Error::InvalidParameter(format!("order must be 1 or 2, got {order}")));
    }
    if !(cutoff >= 0.0 && cutoff.is_finite()) {
        return Err(Error::InvalidParameter(format!("bad cutoff {cutoff}")));
    }
    if !params.w.confining() {
        return Err(Error::Divergent("W does not confine; moments diverge".into()));
    }
    let power = order as f64 - 1.0 - params.xi;
    let [(m, err), _] = sphere_integral(params, settings, |eta| {
        let x = smeared_argument(params, g, eta);
        if x == 0.0 {
            return Ok([0.0, 0.0]);
        }
        let a = params.kernel_factor(eta)?;
        let r = radial_power_integral(power, cutoff, &params.radial_w(eta), &settings.quad)?;
        Ok([a * x.powi(order as i32) * r, 0.0])
    })?;
    let scale = 2.0 * params.j_sq;
    Ok(Estimate {
        mean: scale * m,
        std_error: scale * err,
        n_effective: settings.samples as f64,
        method: ErrorMethod::Naive,
    })
}

/// Moments at a decreasing cutoff sequence and the successive differences.
pub fn smeared_moment_cutoff_sequence(
    params: &PoissonParams,
    g: &[f64],
    order: u32,
    cutoffs: &[f64],
    settings: &AngularSettings,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let values = cutoffs
        .iter()
        .map(|&c| smeared_moment(params, g, order, c, settings).map(|e| e.mean))
        .collect::<Result<Vec<_>>>()?;
    let diffs = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    Ok((values, diffs))
}

/// Rows `(scale, Re C, Im C, error)` as CSV, `g = scale · g₀`.
pub fn write_characteristic_csv<W: Write>(rows: &[(f64, CharacteristicValue)], mut w: W) -> Result<()> {
    writeln!(w, "g,re,im,error")?;
    for (g, c) in rows {
        writeln!(w, "{:?},{:?},{:?},{:?}", g, c.re, c.im, c.error)?;
    }
    Ok(())
}

/// Uniform tensor grid `[lo, hi]^dims` with `nodes` points per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub dims: usize,
    pub lo: f64,
    pub hi: f64,
    pub nodes: usize,
}

impl Grid {
    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.nodes - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.nodes.pow(self.dims as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, index: usize) -> Vec<f64> {
        let h = self.step();
        let mut out = vec![0.0; self.dims];
        let mut rest = index;
        for x in out.iter_mut().rev() {
            *x = self.lo + h * (rest % self.nodes) as f64;
            rest /= self.nodes;
        }
        out
    }

    /// Halves the step, keeping every existing node.
    pub fn refined(&self) -> Self {
        Self {
            nodes: 2 * (self.nodes - 1) + 1,
            ..*self
        }
    }

    pub fn sample<F: Fn(&[f64]) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.len()).map(|i| f(&self.point(i))).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.dims == 0 || self.dims > 6 {
            return Err(Error::InvalidParameter(format!("grid dimension {} unsupported", self.dims)));
        }
        if !(self.lo.is_finite() && self.hi.is_finite() && self.hi > self.lo) {
            return Err(Error::InvalidParameter("grid needs lo < hi".into()));
        }
        if self.nodes < 5 {
            return Err(Error::InvalidParameter(format!(
                "grid too coarse: {} nodes per axis, need at least 5",
                self.nodes
            )));
        }
        self.nodes
            .checked_pow(self.dims as u32)
            .filter(|&n| n <= 1 << 26)
            .ok_or_else(|| Error::InvalidParameter("grid too large".into()))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundState {
    /// The grid of `potential`: the input grid without its boundary layer.
    pub interior: Grid,
    pub potential: Vec<f64>,
    /// `‖𝓗Ψ‖/‖Ψ‖` with the kinetic term taken at fourth order.
    pub residual: f64,
}

/// `𝒱 = ½ Y^{-1} a^{-s} Ψ^{-1} Σ_k ∂²Ψ/∂φ_k²` by central differences.
pub fn ground_state_potential(psi: &[f64], grid: &Grid, y: f64, a: f64, s: u32) -> Result<GroundState> {
    grid.validate()?;
    check_len(grid.len(), psi.len())?;
    if !(y > 0.0 && a > 0.0 && y.is_finite() && a.is_finite()) {
        return Err(Error::InvalidParameter("Y and a must be positive".into()));
    }
    if let Some(i) = psi.iter().position(|p| !(*p > 0.0 && p.is_finite())) {
        return Err(Error::InvalidParameter(format!(
            "wavefunction must be positive on the grid, got {} at node {i}",
            psi[i]
        )));
    }
    let n = grid.nodes;
    let d = grid.dims;
    let h = grid.step();
    let c = 0.5 / (y * a.powi(s as i32));
    let strides: Vec<usize> = (0..d).map(|mu| n.pow((d - 1 - mu) as u32)).collect();
    let coords = |mut i: usize| -> Vec<usize> {
        let mut out = vec![0; d];
        for x in out.iter_mut().rev() {
            *x = i % n;
            i /= n;
        }
        out
    };
    let lap2 = |i: usize| -> f64 {
        strides
            .iter()
            .map(|&st| (psi[i + st] - 2.0 * psi[i] + psi[i - st]) / (h * h))
            .sum()
    };
    let lap4 = |i: usize| -> f64 {
        strides
            .iter()
            .map(|&st| {
                (-psi[i + 2 * st] + 16.0 * psi[i + st] - 30.0 * psi[i] + 16.0 * psi[i - st]
                    - psi[i - 2 * st])
                    / (12.0 * h * h)
            })
            .sum()
    };
    let mut potential = Vec::with_capacity((n - 2).pow(d as u32));
    let mut res_sq = 0.0;
    let mut norm_sq = 0.0;
    for i in 0..grid.len() {
        let x = coords(i);
        if x.iter().any(|&k| k == 0 || k == n - 1) {
            continue;
        }
        let l2 = lap2(i);
        potential.push(c * l2 / psi[i]);
        if x.iter().all(|&k| k >= 2 && k <= n - 3) {
            let h_psi = c * (l2 - lap4(i));
            res_sq += h_psi * h_psi;
            norm_sq += psi[i] * psi[i];
        }
    }
    Ok(GroundState {
        interior: Grid {
            dims: d,
            lo: grid.lo + h,
            hi: grid.hi - h,
            nodes: n - 2,
        },
        potential,
        residual: (res_sq / norm_sq).sqrt(),
    })
}

/// Residuals on `refinements + 1` successively halved grids and the ratios
/// of consecutive residuals.
pub fn residual_refinement<F>(
    psi: F,
    grid: &Grid,
    y: f64,
    a: f64,
    s: u32,
    refinements: usize,
) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: Fn(&[f64]) -> f64,
{
    let mut g = *grid;
    let mut residuals = Vec::with_capacity(refinements + 1);
    for _ in 0..=refinements {
        residuals.push(ground_state_potential(&g.sample(&psi), &g, y, a, s)?.residual);
        g = g.refined();
    }
    let ratios = residuals.windows(2).map(|w| w[0] / w[1]).collect();
    Ok((residuals, ratios))
}
