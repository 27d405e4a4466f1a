use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ChainState;
use crate::error::{Error, Result};

/// Highest perturbative order an insertion observable may request.
pub const MAX_ORDER: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InsertionKind {
    /// `½ Δm₀² κ² aⁿ`
    Mass,
    /// `g₀ κ^p Σ η^p aⁿ`
    Power,
}

/// Per-configuration quantities recorded by a chain.
///
/// Insertion observables are recorded at unit bare strength: the value of
/// `MassInsertion(k)` is `(½ κ² aⁿ)^k / k!`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Observable {
    Kappa,
    KappaSq,
    LogKappa,
    /// `κ² aⁿ / N`, the square of the rescaled radius `ϱ`.
    RhoSq,
    GradientEta,
    EtaPowerSum,
    /// `(Σ η⁴)² = Σ_{k,l} η_k⁴ η_l⁴`
    EtaFourthSumSq,
    MassInsertion(u32),
    PowerInsertion(u32),
}

impl Observable {
    pub fn insertion(kind: InsertionKind, order: u32) -> Result<Self> {
        if order == 0 || order > MAX_ORDER {
            return Err(Error::InvalidParameter(format!(
                "insertion order must be in 1..={MAX_ORDER}, got {order}"
            )));
        }
        Ok(match kind {
            InsertionKind::Mass => Observable::MassInsertion(order),
            InsertionKind::Power => Observable::PowerInsertion(order),
        })
    }

    pub(super) fn evaluate(&self, s: &ChainState<'_>, an: f64) -> f64 {
        let k = s.kappa();
        match *self {
            Observable::Kappa => k,
            Observable::KappaSq => k * k,
            Observable::LogKappa => k.ln(),
            Observable::RhoSq => k * k * an / s.geometry().sites() as f64,
            Observable::GradientEta => s.gradient_sum(),
            Observable::EtaPowerSum => s.power_sum(),
            Observable::EtaFourthSumSq => {
                let q: f64 = s.eta().iter().map(|e| e.powi(4)).sum();
                q * q
            }
            Observable::MassInsertion(order) => power_over_factorial(0.5 * k * k * an, order),
            Observable::PowerInsertion(order) => {
                let p = s.params.power as i32;
                power_over_factorial(k.powi(p) * s.power_sum() * an, order)
            }
        }
    }
}

fn power_over_factorial(x: f64, k: u32) -> f64 {
    (1..=k).fold(1.0, |acc, j| acc * x / j as f64)
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observable::Kappa => f.write_str("kappa"),
            Observable::KappaSq => f.write_str("kappa_sq"),
            Observable::LogKappa => f.write_str("log_kappa"),
            Observable::RhoSq => f.write_str("rho_sq"),
            Observable::GradientEta => f.write_str("gradient_eta"),
            Observable::EtaPowerSum => f.write_str("eta_power_sum"),
            Observable::EtaFourthSumSq => f.write_str("eta_fourth_sum_sq"),
            Observable::MassInsertion(k) => write!(f, "mass_insertion:{k}"),
            Observable::PowerInsertion(k) => write!(f, "power_insertion:{k}"),
        }
    }
}

/// Parses names such as `kappa` or `mass_insertion:2` (order defaults to 1).
pub fn parse_observable(s: &str) -> Result<Observable> {
    let s = s.trim();
    let (head, order) = match s.split_once(':') {
        Some((h, o)) => (
            h,
            Some(o.parse::<u32>().map_err(|_| {
                Error::InvalidParameter(format!("bad insertion order in `{s}`"))
            })?),
        ),
        None => (s, None),
    };
    let plain = |o: Observable| {
        if order.is_some() {
            Err(Error::InvalidParameter(format!("`{head}` takes no order")))
        } else {
            Ok(o)
        }
    };
    match head {
        "kappa" => plain(Observable::Kappa),
        "kappa_sq" => plain(Observable::KappaSq),
        "log_kappa" => plain(Observable::LogKappa),
        "rho_sq" => plain(Observable::RhoSq),
        "gradient_eta" => plain(Observable::GradientEta),
        "eta_power_sum" => plain(Observable::EtaPowerSum),
        "eta_fourth_sum_sq" => plain(Observable::EtaFourthSumSq),
        "mass_insertion" => Observable::insertion(InsertionKind::Mass, order.unwrap_or(1)),
        "power_insertion" => Observable::insertion(InsertionKind::Power, order.unwrap_or(1)),
        other => Err(Error::InvalidParameter(format!("unknown observable `{other}`"))),
    }
}

impl FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_observable(s)
    }
}

impl Serialize for Observable {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Observable {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_observable(&s).map_err(serde::de::Error::custom)
    }
}
