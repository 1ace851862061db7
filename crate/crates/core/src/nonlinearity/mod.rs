//! Nonlinearities `f` with their primitive `F`, the Pohozaev density
//! `F̃(t) = f(t)t − 2F(t)` and the quotient `g(t) = F̃(t)/|t|^{2+4/N}`.

mod conditions;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

pub use conditions::{
    check_conditions, ConditionEntry, ConditionReport, Sampling, Verdict, Witness,
};

/// A pointwise nonlinearity together with its primitive.
pub trait Nonlinearity: Send + Sync + fmt::Debug {
    fn f(&self, t: f64) -> f64;
    /// `F(t) = ∫_0^t f`, supplied in closed form.
    fn primitive(&self, t: f64) -> f64;
    /// Points where `f` is not smooth; quadrature checks split there.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    #[serde(rename = "f0")]
    F0,
    #[serde(rename = "f1")]
    F1,
    #[serde(rename = "f2")]
    F2,
    #[serde(rename = "f3")]
    F3,
    #[serde(rename = "f4")]
    F4,
    #[serde(rename = "f5")]
    F5,
    #[serde(rename = "f6")]
    F6,
    #[serde(rename = "f6'")]
    F6Prime,
    #[serde(rename = "f7")]
    F7,
    #[serde(rename = "odd")]
    Odd,
}

impl Hypothesis {
    pub const ALL: [Hypothesis; 10] = [
        Hypothesis::F0,
        Hypothesis::F1,
        Hypothesis::F2,
        Hypothesis::F3,
        Hypothesis::F4,
        Hypothesis::F5,
        Hypothesis::F6,
        Hypothesis::F6Prime,
        Hypothesis::F7,
        Hypothesis::Odd,
    ];

    /// The hypotheses under which the fiber projection is well posed.
    pub const FIBER: [Hypothesis; 5] = [
        Hypothesis::F0,
        Hypothesis::F1,
        Hypothesis::F2,
        Hypothesis::F3,
        Hypothesis::F4,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Hypothesis::F0 => "f0",
            Hypothesis::F1 => "f1",
            Hypothesis::F2 => "f2",
            Hypothesis::F3 => "f3",
            Hypothesis::F4 => "f4",
            Hypothesis::F5 => "f5",
            Hypothesis::F6 => "f6",
            Hypothesis::F6Prime => "f6'",
            Hypothesis::F7 => "f7",
            Hypothesis::Odd => "odd",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Hypothesis> {
        Hypothesis::ALL
            .into_iter()
            .find(|h| h.tag() == tag || (tag == "f6prime" && *h == Hypothesis::F6Prime))
    }
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// `2 + 4/N`, the mass-critical exponent.
pub fn mass_critical_exponent(dim: usize) -> f64 {
    2.0 + 4.0 / dim as f64
}

/// `2N/(N−2)` for `N ≥ 3`, `+∞` otherwise.
pub fn sobolev_exponent(dim: usize) -> f64 {
    if dim >= 3 {
        2.0 * dim as f64 / (dim as f64 - 2.0)
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone)]
pub struct NonlinearitySpec {
    name: String,
    claimed: BTreeSet<Hypothesis>,
    params: BTreeMap<String, f64>,
    kernel: Arc<dyn Nonlinearity>,
}

impl NonlinearitySpec {
    pub fn new(
        name: impl Into<String>,
        kernel: Arc<dyn Nonlinearity>,
        claimed: impl IntoIterator<Item = Hypothesis>,
        params: BTreeMap<String, f64>,
    ) -> Self {
        NonlinearitySpec {
            name: name.into(),
            claimed: claimed.into_iter().collect(),
            params,
            kernel,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn claimed(&self) -> &BTreeSet<Hypothesis> {
        &self.claimed
    }

    pub fn claims(&self, h: Hypothesis) -> bool {
        self.claimed.contains(&h)
    }

    pub fn claims_all(&self, hs: &[Hypothesis]) -> bool {
        hs.iter().all(|h| self.claimed.contains(h))
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.get(key).copied()
    }

    #[inline]
    pub fn f(&self, t: f64) -> f64 {
        self.kernel.f(t)
    }

    #[inline]
    pub fn primitive(&self, t: f64) -> f64 {
        self.kernel.primitive(t)
    }

    #[inline]
    pub fn f_tilde(&self, t: f64) -> f64 {
        self.f(t) * t - 2.0 * self.primitive(t)
    }

    /// `F̃(t)/|t|^{2+4/N}`, continuously extended by 0 at the origin.
    #[inline]
    pub fn g(&self, t: f64, dim: usize) -> f64 {
        let d = t.abs().powf(mass_critical_exponent(dim));
        // below the normal range the quotient is rounding noise; its limit is 0
        if !d.is_normal() {
            return 0.0;
        }
        self.f_tilde(t) / d
    }

    /// `F(t)/|t|^{2+4/N}`, extended by 0 at the origin.
    #[inline]
    pub fn primitive_quotient(&self, t: f64, dim: usize) -> f64 {
        let d = t.abs().powf(mass_critical_exponent(dim));
        if !d.is_normal() {
            return 0.0;
        }
        self.primitive(t) / d
    }

    /// Largest mismatch between the supplied primitive and adaptive quadrature
    /// of `f` over the sample, as `(t, F(t), ∫_0^t f)`, if any exceeds
    /// `rel_tol·(1 + |F(t)|)`.
    pub fn primitive_mismatch(&self, ts: &[f64], rel_tol: f64) -> Option<(f64, f64, f64)> {
        for &t in ts {
            let exact = self.primitive(t);
            let mut cuts: Vec<f64> = self
                .kernel
                .breakpoints()
                .into_iter()
                .filter(|&b| b.abs() < t.abs() && b * t > 0.0)
                .collect();
            cuts.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
            cuts.push(t);
            let mut integral = 0.0;
            let mut from = 0.0;
            for to in cuts {
                integral += quad::adaptive(&|x| self.f(x), from, to, 1e-13);
                from = to;
            }
            if (exact - integral).abs() > rel_tol * (1.0 + exact.abs()) {
                return Some((t, exact, integral));
            }
        }
        None
    }
}

pub fn f_tilde(nl: &NonlinearitySpec, t: f64) -> f64 {
    nl.f_tilde(t)
}

pub fn g_quotient(nl: &NonlinearitySpec, t: f64, dim: usize) -> f64 {
    nl.g(t, dim)
}

/// 64 radii, half of them negative, log-spaced over `[1e-4, 1e4]`.
pub fn consistency_sample() -> Vec<f64> {
    (0..32)
        .flat_map(|i| {
            let t = 10f64.powf(-4.0 + 8.0 * i as f64 / 31.0);
            [t, -t]
        })
        .collect()
}

/// Closed-form builtin nonlinearities.
#[derive(Debug, Clone)]
pub enum Builtin {
    /// `f(t) = |t|^{p−2}t`.
    PurePower { p: f64 },
    /// `F(t) = |t|^{2+4/N} ln(1 + |t|^α)`.
    LogSupercritical { dim: usize, alpha: f64 },
    /// Critical power `|t|^{2*−2}t` on `|t| ≤ 1`, `|t|^{p−2}t` beyond.
    CriticalPiecewise { crit: f64, p: f64 },
    /// `F(t) = β(N−2)|t|^{2*} / (2N(1 + |t|^{β_N}))`.
    F6PrimeExample {
        crit: f64,
        beta: f64,
        beta_n: f64,
        dim: usize,
    },
}

pub const BUILTIN_NAMES: [&str; 4] = [
    "pure_power",
    "log_supercritical",
    "critical_piecewise",
    "f6prime_example",
];

impl Nonlinearity for Builtin {
    fn f(&self, t: f64) -> f64 {
        let a = t.abs();
        match *self {
            Builtin::PurePower { p } => a.powf(p - 2.0) * t,
            Builtin::LogSupercritical { dim, alpha } => {
                let n = dim as f64;
                let s = a.powf(alpha);
                ((2.0 + 4.0 / n) * s.ln_1p() + alpha * s / (1.0 + s)) * a.powf(4.0 / n) * t
            }
            Builtin::CriticalPiecewise { crit, p } => {
                if a <= 1.0 {
                    a.powf(crit - 2.0) * t
                } else {
                    a.powf(p - 2.0) * t
                }
            }
            Builtin::F6PrimeExample {
                crit,
                beta,
                beta_n,
                dim,
            } => {
                let n = dim as f64;
                let s = a.powf(beta_n);
                beta * (1.0 - beta_n * (n - 2.0) * s / (2.0 * n * (1.0 + s))) * a.powf(crit - 2.0)
                    * t
                    / (1.0 + s)
            }
        }
    }

    fn primitive(&self, t: f64) -> f64 {
        let a = t.abs();
        match *self {
            Builtin::PurePower { p } => a.powf(p) / p,
            Builtin::LogSupercritical { dim, alpha } => {
                a.powf(mass_critical_exponent(dim)) * a.powf(alpha).ln_1p()
            }
            Builtin::CriticalPiecewise { crit, p } => {
                if a <= 1.0 {
                    a.powf(crit) / crit
                } else {
                    1.0 / crit + (a.powf(p) - 1.0) / p
                }
            }
            Builtin::F6PrimeExample {
                crit,
                beta,
                beta_n,
                dim,
            } => {
                let n = dim as f64;
                beta * (n - 2.0) * a.powf(crit) / (2.0 * n * (1.0 + a.powf(beta_n)))
            }
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Builtin::CriticalPiecewise { .. } => vec![-1.0, 1.0],
            _ => Vec::new(),
        }
    }
}

/// `α_N`: 1 for `N ≤ 2`, `8/(N(N−2))` otherwise.
pub fn log_alpha(dim: usize) -> f64 {
    if dim <= 2 {
        1.0
    } else {
        8.0 / (dim * (dim - 2)) as f64
    }
}

/// `p_N = 2 + 4/N + 8/N²`, lower end of the exponent window of the
/// critical piecewise example.
pub fn critical_window_floor(dim: usize) -> f64 {
    let n = dim as f64;
    2.0 + 4.0 / n + 8.0 / (n * n)
}

/// Builds a named builtin for dimension `dim`.
///
/// Recognised parameters: `p` (pure_power, critical_piecewise), `alpha`
/// (log_supercritical), `beta` and `beta_n` (f6prime_example).
pub fn builtin(
    name: &str,
    dim: usize,
    params: &BTreeMap<String, f64>,
) -> Result<NonlinearitySpec> {
    use Hypothesis::*;
    if dim == 0 {
        return Err(Error::Config("dimension must be at least 1".into()));
    }
    let known: &[&str] = match name {
        "pure_power" | "critical_piecewise" => &["p"],
        "log_supercritical" => &["alpha"],
        "f6prime_example" => &["beta", "beta_n"],
        _ => {
            return Err(Error::Config(format!(
                "unknown builtin `{name}` (expected one of {})",
                BUILTIN_NAMES.join(", ")
            )))
        }
    };
    if let Some(k) = params.keys().find(|k| !known.contains(&k.as_str())) {
        return Err(Error::Config(format!("`{name}` has no parameter `{k}`")));
    }
    let lower = mass_critical_exponent(dim);
    let crit = sobolev_exponent(dim);
    let mut resolved = BTreeMap::new();
    let (kernel, claimed): (Builtin, Vec<Hypothesis>) = match name {
        "pure_power" => {
            let p = *params
                .get("p")
                .ok_or_else(|| Error::Config("pure_power needs parameter p".into()))?;
            if !(p > lower && p < crit) {
                return Err(Error::Config(format!(
                    "pure_power exponent p = {p} outside the window ({lower}, {crit}) for N = {dim}"
                )));
            }
            resolved.insert("p".into(), p);
            (
                Builtin::PurePower { p },
                vec![F0, F1, F2, F3, F4, F5, F6, F7, Odd],
            )
        }
        "log_supercritical" => {
            let alpha = params.get("alpha").copied().unwrap_or(log_alpha(dim));
            if !(alpha > 0.0 && alpha.is_finite()) {
                return Err(Error::Config(format!("alpha must be positive, got {alpha}")));
            }
            resolved.insert("alpha".into(), alpha);
            (
                Builtin::LogSupercritical { dim, alpha },
                vec![F0, F1, F2, F3, F4, F5, F6, Odd],
            )
        }
        "critical_piecewise" => {
            if dim < 3 {
                return Err(Error::Config(
                    "critical_piecewise needs N >= 3 (finite critical exponent)".into(),
                ));
            }
            let floor = critical_window_floor(dim);
            let p = params
                .get("p")
                .copied()
                .unwrap_or(floor + 0.25 * (crit - floor));
            if !(p > floor && p < crit) {
                return Err(Error::Config(format!(
                    "critical_piecewise exponent p = {p} outside ({floor}, {crit}) for N = {dim}"
                )));
            }
            resolved.insert("p".into(), p);
            (
                Builtin::CriticalPiecewise { crit, p },
                vec![F0, F1, F2, F3, F4, Odd],
            )
        }
        "f6prime_example" => {
            if dim < 3 {
                return Err(Error::Config("f6prime_example needs N >= 3".into()));
            }
            let cap = 4.0 / (dim * (dim - 2)) as f64;
            let beta = params.get("beta").copied().unwrap_or(1.0);
            let beta_n = params
                .get("beta_n")
                .copied()
                .unwrap_or(1.0 / (dim * (dim - 2)) as f64);
            if !(beta > 0.0 && beta.is_finite()) {
                return Err(Error::Config(format!("beta must be positive, got {beta}")));
            }
            if !(beta_n > 0.0 && beta_n <= cap * (1.0 + 1e-12)) {
                return Err(Error::Config(format!(
                    "beta_n = {beta_n} outside (0, {cap}] for N = {dim}"
                )));
            }
            resolved.insert("beta".into(), beta);
            resolved.insert("beta_n".into(), beta_n);
            (
                Builtin::F6PrimeExample {
                    crit,
                    beta,
                    beta_n,
                    dim,
                },
                vec![F0, F1, F2, F3, F4, F5, F6Prime, Odd],
            )
        }
        _ => unreachable!(),
    };
    Ok(NonlinearitySpec::new(
        name,
        Arc::new(kernel),
        claimed,
        resolved,
    ))
}
