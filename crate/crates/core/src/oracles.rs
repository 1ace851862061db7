//! Closed-form reference solutions and their integrals.
//!
//! Everything here is computed from explicit formulas with composite
//! Gauss–Legendre quadrature; nothing depends on the grid discretization or
//! the solver. Each integral is evaluated at `n` and `2n` panels and the
//! difference is reported as its error bound.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};
use crate::grid::sphere_measure;
use crate::quad::GaussLegendre;

const RULE_POINTS: usize = 12;

/// A reference value with its quadrature error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounded {
    pub value: f64,
    pub error: f64,
}

impl Bounded {
    fn exact(value: f64) -> Self {
        Bounded { value, error: 0.0 }
    }

    /// `|value − x| ≤ error + rel·|value|`.
    pub fn agrees(&self, x: f64, rel: f64) -> bool {
        (self.value - x).abs() <= self.error + rel * self.value.abs()
    }
}

/// `∫_a^b f` at `panels` and `2·panels`; the finer value with the difference
/// as bound.
fn integral(a: f64, b: f64, panels: usize, f: impl Fn(f64) -> f64) -> Bounded {
    let rule = GaussLegendre::new(RULE_POINTS);
    let coarse = rule.composite(a, b, panels, &f);
    let fine = rule.composite(a, b, 2 * panels, &f);
    Bounded {
        value: fine,
        error: (fine - coarse).abs(),
    }
}

fn sech(x: f64) -> f64 {
    if x.abs() > 700.0 {
        0.0
    } else {
        1.0 / x.cosh()
    }
}

/// Standing wave `w(x) = A sech^c(Bx)` of `−w'' + μw = |w|^{p−2}w` on the line,
/// with `A = (μp/2)^{1/(p−2)}`, `c = 2/(p−2)`, `B = (p−2)√μ/2`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Soliton {
    pub p: f64,
    pub mu: f64,
    pub amplitude: f64,
    pub rate: f64,
    pub power: f64,
    pub mass: Bounded,
    pub grad_norm_sq: Bounded,
    pub potential: Bounded,
    pub energy: Bounded,
    pub pohozaev: Bounded,
}

impl Soliton {
    pub fn profile(&self, x: f64) -> f64 {
        self.amplitude * sech(self.rate * x).powf(self.power)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let y = self.rate * x;
        -self.amplitude * self.power * self.rate * sech(y).powf(self.power) * y.tanh()
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        let y = self.rate * x;
        let (c, b) = (self.power, self.rate);
        let th = y.tanh();
        self.amplitude * b * b * c * sech(y).powf(c) * (c * th * th - sech(y).powi(2))
    }

    /// `−w'' + μw − |w|^{p−2}w` at `x`.
    pub fn residual(&self, x: f64) -> f64 {
        let w = self.profile(x);
        -self.second_derivative(x) + self.mu * w - w.abs().powf(self.p - 2.0) * w
    }
}

/// Exponent `e` with `mass(w_μ) = μ^e mass(w_1)`.
pub fn soliton_mass_exponent(p: f64) -> f64 {
    2.0 / (p - 2.0) - 0.5
}

/// Exponent `θ` with `E_m ∝ m^θ` for the pure power in one dimension.
pub fn soliton_energy_exponent(p: f64) -> f64 {
    (p + 2.0) / (6.0 - p)
}

fn check_soliton_window(p: f64) -> Result<()> {
    if !(p > 6.0 && p.is_finite()) {
        return Err(Error::Domain(format!(
            "soliton oracle needs p > 6 (mass supercritical in one dimension), got {p}"
        )));
    }
    Ok(())
}

/// The soliton with multiplier `mu`, integrals over the whole line.
pub fn soliton_1d(p: f64, mu: f64) -> Result<Soliton> {
    soliton_1d_with(p, mu, 64)
}

/// As [`soliton_1d`] with an explicit base panel count.
pub fn soliton_1d_with(p: f64, mu: f64, panels: usize) -> Result<Soliton> {
    check_soliton_window(p)?;
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::Domain(format!("multiplier must be positive, got {mu}")));
    }
    let amplitude = (mu * p / 2.0).powf(1.0 / (p - 2.0));
    let power = 2.0 / (p - 2.0);
    let rate = (p - 2.0) * mu.sqrt() / 2.0;
    let mut sol = Soliton {
        p,
        mu,
        amplitude,
        rate,
        power,
        mass: Bounded::exact(0.0),
        grad_norm_sq: Bounded::exact(0.0),
        potential: Bounded::exact(0.0),
        energy: Bounded::exact(0.0),
        pohozaev: Bounded::exact(0.0),
    };
    // w² ~ e^{−2cBx}: stop where the integrands are below 1e−40 of their peak
    let end = 46.0 / (power * rate);
    let both = |b: Bounded| Bounded {
        value: 2.0 * b.value,
        error: 2.0 * b.error,
    };
    let s = &sol;
    let mass = both(integral(0.0, end, panels, |x| s.profile(x).powi(2)));
    let grad = both(integral(0.0, end, panels, |x| s.derivative(x).powi(2)));
    let lp = both(integral(0.0, end, panels, |x| s.profile(x).powf(p)));
    let potential = Bounded {
        value: lp.value / p,
        error: lp.error / p,
    };
    sol.mass = mass;
    sol.grad_norm_sq = grad;
    sol.potential = potential;
    sol.energy = Bounded {
        value: 0.5 * grad.value - potential.value,
        error: 0.5 * grad.error + potential.error,
    };
    // P = ‖w'‖² − ½∫F̃, F̃ = (1 − 2/p)|w|^p in one dimension
    sol.pohozaev = Bounded {
        value: grad.value - 0.5 * (1.0 - 2.0 / p) * lp.value,
        error: grad.error + 0.5 * (1.0 - 2.0 / p) * lp.error,
    };
    Ok(sol)
}

/// `∫_ℝ w_1²` from the Beta-function identity, for cross-checking quadrature.
pub fn soliton_unit_mass_closed_form(p: f64) -> f64 {
    let amplitude = (p / 2.0).powf(1.0 / (p - 2.0));
    let rate = (p - 2.0) / 2.0;
    let a = 4.0 / (p - 2.0);
    // ∫_0^∞ sech^a = √π Γ(a/2) / (2Γ((a+1)/2))
    let half_line = PI.sqrt() * gamma(a / 2.0) / (2.0 * gamma((a + 1.0) / 2.0));
    2.0 * amplitude * amplitude * half_line / rate
}

/// The soliton of mass `m` via the exact dilation law.
pub fn soliton_for_mass(p: f64, m: f64) -> Result<Soliton> {
    check_soliton_window(p)?;
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::Domain(format!("mass must be positive, got {m}")));
    }
    let unit = soliton_1d(p, 1.0)?;
    let mu = (m / unit.mass.value).powf(1.0 / soliton_mass_exponent(p));
    soliton_1d(p, mu)
}

/// `Γ`-form of the best Sobolev constant,
/// `S = πN(N−2) (Γ(N/2)/Γ(N))^{2/N}`.
pub fn sobolev_constant_closed_form(dim: usize) -> f64 {
    let n = dim as f64;
    PI * n * (n - 2.0) * ((ln_gamma(n / 2.0) - ln_gamma(n)) * 2.0 / n).exp()
}

/// Aubin–Talenti profile `U_ε(x) = [N(N−2)ε]^{(N−2)/4} / (ε + |x|²)^{(N−2)/2}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Bubble {
    pub dim: usize,
    pub eps: f64,
    pub mass: Bounded,
    pub grad_norm_sq: Bounded,
    /// `∫|U_ε|^{2*}`
    pub critical_norm: Bounded,
    pub energy: Bounded,
    /// `S` recovered as `‖∇U‖^{4/N}`
    pub sobolev: Bounded,
}

impl Bubble {
    pub fn profile(&self, r: f64) -> f64 {
        bubble_profile(self.dim, self.eps, r)
    }

    pub fn derivative(&self, r: f64) -> f64 {
        let n = self.dim as f64;
        let e = self.eps;
        -(n - 2.0) * r * (n * (n - 2.0) * e).powf((n - 2.0) / 4.0) / (e + r * r).powf(n / 2.0)
    }
}

fn bubble_profile(dim: usize, eps: f64, r: f64) -> f64 {
    let n = dim as f64;
    (n * (n - 2.0) * eps).powf((n - 2.0) / 4.0) / (eps + r * r).powf((n - 2.0) / 2.0)
}

/// Radial integral `ω ∫_0^∞ h(r) r^{N−1} dr` through `r = √ε tan θ`, which
/// turns the algebraic tails of the bubble into smooth trigonometric factors.
fn radial_integral(dim: usize, eps: f64, panels: usize, h: impl Fn(f64) -> f64) -> Bounded {
    let omega = sphere_measure(dim);
    let scale = eps.sqrt();
    let b = integral(0.0, FRAC_PI_2, panels, |th: f64| {
        if th >= FRAC_PI_2 {
            return 0.0;
        }
        let r = scale * th.tan();
        let jac = scale / th.cos().powi(2);
        h(r) * r.powi(dim as i32 - 1) * jac
    });
    Bounded {
        value: omega * b.value,
        error: omega * b.error,
    }
}

/// The bubble with parameter `eps`, for `N ≥ 5` where it has finite mass.
pub fn bubble(dim: usize, eps: f64) -> Result<Bubble> {
    bubble_with(dim, eps, 32)
}

pub fn bubble_with(dim: usize, eps: f64, panels: usize) -> Result<Bubble> {
    if dim < 5 {
        return Err(Error::Domain(format!(
            "the bubble has infinite mass for N = {dim}; need N >= 5"
        )));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Domain(format!("eps must be positive, got {eps}")));
    }
    let n = dim as f64;
    let crit = 2.0 * n / (n - 2.0);
    let mut b = Bubble {
        dim,
        eps,
        mass: Bounded::exact(0.0),
        grad_norm_sq: Bounded::exact(0.0),
        critical_norm: Bounded::exact(0.0),
        energy: Bounded::exact(0.0),
        sobolev: Bounded::exact(0.0),
    };
    let (mass, grad, crit_norm) = {
        let bb = &b;
        (
            radial_integral(dim, eps, panels, |r| bb.profile(r).powi(2)),
            radial_integral(dim, eps, panels, |r| bb.derivative(r).powi(2)),
            radial_integral(dim, eps, panels, |r| bb.profile(r).powf(crit)),
        )
    };
    b.mass = mass;
    b.grad_norm_sq = grad;
    b.critical_norm = crit_norm;
    b.energy = Bounded {
        value: 0.5 * grad.value - crit_norm.value / crit,
        error: 0.5 * grad.error + crit_norm.error / crit,
    };
    let s = grad.value.powf(2.0 / n);
    b.sobolev = Bounded {
        value: s,
        error: s * 2.0 / n * grad.error / grad.value,
    };
    Ok(b)
}

/// `‖U‖²` of the unit bubble (`ε = 1`).
pub fn bubble_unit_mass(dim: usize) -> Result<f64> {
    bubble(dim, 1.0).map(|b| b.mass.value)
}

/// The bubble of mass `m`, `ε = m/‖U‖²`.
pub fn bubble_for_mass(dim: usize, m: f64) -> Result<Bubble> {
    let unit = bubble_unit_mass(dim)?;
    bubble(dim, m / unit)
}

/// `S^{N/2} = ‖∇U‖²` for `N ≥ 3` by quadrature (the gradient is square
/// integrable in every dimension `N ≥ 3`).
pub fn sobolev_energy(dim: usize) -> Result<Bounded> {
    if dim < 3 {
        return Err(Error::Domain(format!("no critical exponent for N = {dim}")));
    }
    let n = dim as f64;
    let grad = radial_integral(dim, 1.0, 64, |r| {
        let c = (n * (n - 2.0)).powf((n - 2.0) / 4.0);
        ((n - 2.0) * r * c / (1.0 + r * r).powf(n / 2.0)).powi(2)
    });
    Ok(grad)
}

/// Best Gagliardo–Nirenberg constant estimate over `sech^c(r)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GnEstimate {
    pub dim: usize,
    pub p: f64,
    pub constant: f64,
    pub best_c: f64,
    pub family_size: usize,
}

/// Weinstein quotient `∫|u|^p / (‖∇u‖^a ‖u‖^b)` with `a = N(p−2)/2`,
/// `b = p − a`, for `u = sech^c(r)` in ℝ^N.
pub fn weinstein_quotient(dim: usize, p: f64, c: f64) -> f64 {
    let omega = sphere_measure(dim);
    let n = dim as f64;
    let end = 46.0 / c.min(1.0) + 10.0;
    let panels = (end * 2.0).ceil() as usize;
    let rule = GaussLegendre::new(RULE_POINTS);
    let rad = |h: &dyn Fn(f64) -> f64| {
        omega * rule.composite(0.0, end, panels, &|r: f64| h(r) * r.powi(dim as i32 - 1))
    };
    let u = |r: f64| sech(r).powf(c);
    let du = |r: f64| -c * sech(r).powf(c) * r.tanh();
    let lp = rad(&|r| u(r).powf(p));
    let m = rad(&|r| u(r).powi(2));
    let g = rad(&|r| du(r).powi(2));
    let a = n * (p - 2.0) / 2.0;
    let b = p - a;
    lp / (g.powf(a / 2.0) * m.powf(b / 2.0))
}

/// Maximizes the Weinstein quotient over `c ∈ [1/8, 4]` on a nested grid of
/// `2^resolution + 1` exponents. Larger `resolution` only adds candidates.
pub fn gn_check(dim: usize, p: f64, resolution: u32) -> Result<GnEstimate> {
    let n = dim as f64;
    let upper = if dim <= 2 { f64::INFINITY } else { 2.0 * n / (n - 2.0) };
    if !(p > 2.0 && p < upper) {
        return Err(Error::Domain(format!("GN exponent p = {p} outside (2, {upper})")));
    }
    let count = (1usize << resolution) + 1;
    let (lo, hi) = (0.125, 4.0);
    let mut best = (f64::NEG_INFINITY, lo);
    for k in 0..count {
        let c = lo + (hi - lo) * k as f64 / (count - 1) as f64;
        let w = weinstein_quotient(dim, p, c);
        if w > best.0 {
            best = (w, c);
        }
    }
    Ok(GnEstimate {
        dim,
        p,
        constant: best.0,
        best_c: best.1,
        family_size: count,
    })
}

/// Auditable table of oracle values for one case.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleTable {
    pub case: String,
    pub params: BTreeMap<String, f64>,
    pub values: BTreeMap<String, Bounded>,
}

impl OracleTable {
    pub fn soliton(p: f64, mass: Option<f64>, mu: Option<f64>) -> Result<OracleTable> {
        let sol = match (mass, mu) {
            (Some(m), None) => soliton_for_mass(p, m)?,
            (None, Some(mu)) => soliton_1d(p, mu)?,
            (None, None) => soliton_for_mass(p, 1.0)?,
            (Some(_), Some(_)) => {
                return Err(Error::Config("give either a mass or a multiplier, not both".into()))
            }
        };
        let params = [("p".to_string(), p), ("dim".to_string(), 1.0)]
            .into_iter()
            .collect();
        let values = [
            ("mass", sol.mass),
            ("multiplier", Bounded::exact(sol.mu)),
            ("energy", sol.energy),
            ("grad_norm_sq", sol.grad_norm_sq),
            ("pohozaev", sol.pohozaev),
            ("amplitude", Bounded::exact(sol.amplitude)),
            ("energy_exponent", Bounded::exact(soliton_energy_exponent(p))),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        Ok(OracleTable {
            case: "soliton".into(),
            params,
            values,
        })
    }

    pub fn bubble(dim: usize, mass: Option<f64>, eps: Option<f64>) -> Result<OracleTable> {
        let b = match (mass, eps) {
            (Some(m), None) => bubble_for_mass(dim, m)?,
            (None, Some(e)) => bubble(dim, e)?,
            (None, None) => bubble(dim, (dim * (dim - 2)) as f64)?,
            (Some(_), Some(_)) => {
                return Err(Error::Config("give either a mass or eps, not both".into()))
            }
        };
        let params = [("dim".to_string(), dim as f64), ("eps".to_string(), b.eps)]
            .into_iter()
            .collect();
        let closed = sobolev_constant_closed_form(dim);
        let values = [
            ("mass", b.mass),
            ("multiplier", Bounded::exact(0.0)),
            ("energy", b.energy),
            ("grad_norm_sq", b.grad_norm_sq),
            ("critical_norm", b.critical_norm),
            ("sobolev_constant", b.sobolev),
            ("sobolev_constant_closed_form", Bounded::exact(closed)),
            ("peak", Bounded::exact(b.profile(0.0))),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        Ok(OracleTable {
            case: "bubble".into(),
            params,
            values,
        })
    }

    pub fn gn(dim: usize, p: f64, resolution: u32) -> Result<OracleTable> {
        let est = gn_check(dim, p, resolution)?;
        let coarse = gn_check(dim, p, resolution.saturating_sub(1))?;
        let params = [
            ("dim".to_string(), dim as f64),
            ("p".to_string(), p),
            ("family_size".to_string(), est.family_size as f64),
        ]
        .into_iter()
        .collect();
        let values = [
            (
                "constant",
                Bounded {
                    value: est.constant,
                    error: (est.constant - coarse.constant).abs(),
                },
            ),
            ("best_exponent", Bounded::exact(est.best_c)),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        Ok(OracleTable {
            case: "gn".into(),
            params,
            values,
        })
    }
}
