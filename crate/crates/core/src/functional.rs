//! Action, Pohozaev functional, the dilation fiber and its projection.
//!
//! The dilation `(s⋆u)(x) = e^{Ns/2} u(e^s x)` keeps the mass and multiplies
//! the Dirichlet energy by `e^{2s}`. With `q = 2 + 4/N` the potential term
//! transforms as `e^{-Ns} F(e^{Ns/2} t) = e^{2s} |t|^q F(τ)/|τ|^q`,
//! `τ = e^{Ns/2} t`, so the whole fiber is evaluated on the original grid:
//!
//! ```text
//! I(s⋆u) = e^{2s} [ D/2 − Σ W_j Φ(e^{Ns/2}v_j) |v_j|^q ],  Φ(τ) = F(τ)/|τ|^q
//! P(s⋆u) = e^{2s} [ D   − (N/2) Σ W_j g(e^{Ns/2}v_j) |v_j|^q ]
//! ```
//!
//! where `(W_j, v_j)` are the grid's Gauss weights and interpolant values.
//!
//! Under (f4) the second bracket is strictly decreasing in `s`, which is what
//! the projection exploits.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{grad_norm_sq, mass, neg_laplacian_values, GridFunction};
use crate::nonlinearity::{mass_critical_exponent, Hypothesis, NonlinearitySpec};

/// Largest admissible `|s|` in the projection.
pub const FIBER_CAP: f64 = 50.0;
/// Bracket width at which the projection stops.
pub const BRACKET_WIDTH: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberResult {
    pub s_star: f64,
    pub value: f64,
    pub residual: f64,
    pub bracket: [f64; 2],
}

/// `½‖∇u‖² − ∫F(u)`.
pub fn action(u: &GridFunction, nl: &NonlinearitySpec) -> f64 {
    0.5 * grad_norm_sq(u) - u.grid().integrate(u.values(), |v| nl.primitive(v))
}

/// `‖∇u‖² − (N/2) ∫F̃(u)`.
pub fn pohozaev(u: &GridFunction, nl: &NonlinearitySpec) -> f64 {
    let n = u.grid().dim() as f64;
    grad_norm_sq(u) - 0.5 * n * u.grid().integrate(u.values(), |v| nl.f_tilde(v))
}

/// `s⋆u` resampled on the grid of `u` by monotone cubic interpolation, zero
/// beyond the last node.
pub fn dilate(s: f64, u: &GridFunction) -> GridFunction {
    if s == 0.0 {
        return u.clone();
    }
    let n = u.grid().dim() as f64;
    let p = u.interpolant();
    let (a, b) = ((s).exp(), (0.5 * n * s).exp());
    GridFunction::from_fn(u.grid().clone(), |r| b * p.eval(a * r))
}

/// `s⋆u` represented exactly: same values times `e^{Ns/2}` on the grid with
/// every radius multiplied by `e^{-s}`.
pub fn materialize(s: f64, u: &GridFunction) -> GridFunction {
    let n = u.grid().dim() as f64;
    let grid = Arc::new(u.grid().scaled((-s).exp()));
    let b = (0.5 * n * s).exp();
    GridFunction::from_parts_unchecked(grid, u.values().iter().map(|v| b * v).collect())
}

/// Precomputed pieces of the fiber map of one profile.
struct Fiber<'a> {
    nl: &'a NonlinearitySpec,
    dim: usize,
    half_n: f64,
    dirichlet: f64,
    /// `(W_j |v_j|^q, v_j)` over the Gauss points with `v_j ≠ 0`.
    terms: Vec<(f64, f64)>,
}

impl<'a> Fiber<'a> {
    fn new(u: &GridFunction, nl: &'a NonlinearitySpec) -> Self {
        let dim = u.grid().dim();
        let q = mass_critical_exponent(dim);
        let grid = u.grid();
        let terms = grid
            .points()
            .iter()
            .zip(grid.point_values(u.values()))
            .filter(|(_, v)| *v != 0.0)
            .map(|(p, v)| (p.2 * v.abs().powf(q), v))
            .collect();
        Fiber {
            nl,
            dim,
            half_n: 0.5 * dim as f64,
            dirichlet: grad_norm_sq(u),
            terms,
        }
    }

    /// `e^{-2s} P(s⋆u)`, strictly decreasing in `s` under (f4).
    fn bracket(&self, s: f64) -> f64 {
        let a = (self.half_n * s).exp();
        let sum: f64 = self
            .terms
            .iter()
            .map(|&(wq, v)| wq * self.nl.g(a * v, self.dim))
            .sum();
        self.dirichlet - self.half_n * sum
    }

    fn action(&self, s: f64) -> f64 {
        let a = (self.half_n * s).exp();
        let sum: f64 = self
            .terms
            .iter()
            .map(|&(wq, v)| wq * self.nl.primitive_quotient(a * v, self.dim))
            .sum();
        (2.0 * s).exp() * (0.5 * self.dirichlet - sum)
    }

    fn scale(&self) -> f64 {
        self.dirichlet
    }
}

/// `I(s⋆u)` in closed form on the grid of `u`.
pub fn fiber_action(u: &GridFunction, nl: &NonlinearitySpec, s: f64) -> f64 {
    Fiber::new(u, nl).action(s)
}

/// `P(s⋆u) = d/ds I(s⋆u)` in closed form on the grid of `u`.
pub fn fiber_pohozaev(u: &GridFunction, nl: &NonlinearitySpec, s: f64) -> f64 {
    (2.0 * s).exp() * Fiber::new(u, nl).bracket(s)
}

/// `e^{-2s} P(s⋆u)`, the monotone factor of [`fiber_pohozaev`].
pub fn bracket(u: &GridFunction, nl: &NonlinearitySpec, s: f64) -> f64 {
    Fiber::new(u, nl).bracket(s)
}

/// The unique `s(u)` with `P(s(u)⋆u) = 0`, searched outward from `s = 0`.
pub fn project(u: &GridFunction, nl: &NonlinearitySpec) -> Result<FiberResult> {
    project_from(u, nl, 0.0, 1.0)
}

/// As [`project`], expanding from `start` with first step `step`. A good
/// `start` (the previous iterate's `s`) makes the search local.
pub fn project_from(
    u: &GridFunction,
    nl: &NonlinearitySpec,
    start: f64,
    step: f64,
) -> Result<FiberResult> {
    if mass(u) <= 0.0 {
        return Err(Error::Domain("cannot project the zero profile".into()));
    }
    let fiber = Fiber::new(u, nl);
    let eval = |s: f64| -> Result<f64> {
        let b = fiber.bracket(s);
        if b.is_finite() {
            Ok(b)
        } else {
            Err(Error::Nonconformance {
                hypothesis: Hypothesis::F0.tag().into(),
                detail: format!("fiber bracket is not finite at s = {s}"),
            })
        }
    };
    let start = start.clamp(-FIBER_CAP, FIBER_CAP);
    let b0 = eval(start)?;
    if b0 == 0.0 {
        return Ok(finish(&fiber, start, [start, start]));
    }
    // (lo, b_lo > 0) and (hi, b_hi < 0)
    let up = b0 > 0.0;
    let mut inner = (start, b0);
    let mut d = step.abs().max(1e-12);
    let outer = loop {
        let s = if up {
            (start + d).min(FIBER_CAP)
        } else {
            (start - d).max(-FIBER_CAP)
        };
        let b = eval(s)?;
        if (b < 0.0) == up || b == 0.0 {
            break (s, b);
        }
        inner = (s, b);
        if s.abs() >= FIBER_CAP {
            let (hypothesis, why) = if up {
                (Hypothesis::F3, "stays positive up to s = 50 (mass-supercritical growth not detected)")
            } else {
                (Hypothesis::F1, "stays negative down to s = -50 (f(t) not o(|t|^{1+4/N}) at 0)")
            };
            return Err(Error::Nonconformance {
                hypothesis: hypothesis.tag().into(),
                detail: format!("Pohozaev bracket {why}"),
            });
        }
        d *= 2.0;
    };
    let (mut lo, mut hi) = if up { (inner, outer) } else { (outer, inner) };
    if lo.1 == 0.0 {
        return Ok(finish(&fiber, lo.0, [lo.0, lo.0]));
    }
    if hi.1 == 0.0 {
        return Ok(finish(&fiber, hi.0, [hi.0, hi.0]));
    }
    // Illinois regula falsi with a bisection safeguard.
    let noise = 1e-14 * fiber.scale().max(f64::MIN_POSITIVE);
    let mut side = 0i8;
    let mut iters = 0;
    while hi.0 - lo.0 > BRACKET_WIDTH && iters < 400 {
        iters += 1;
        let width = hi.0 - lo.0;
        let mut c = lo.0 + lo.1 * width / (lo.1 - hi.1);
        if !(c > lo.0 && c < hi.0) || iters % 8 == 0 {
            c = 0.5 * (lo.0 + hi.0);
        }
        let bc = eval(c)?;
        if bc == 0.0 {
            return Ok(finish(&fiber, c, [c, c]));
        }
        if bc > 0.0 {
            lo = (c, bc);
            if side == 1 {
                hi.1 *= 0.5;
            }
            side = 1;
        } else {
            hi = (c, bc);
            if side == -1 {
                lo.1 *= 0.5;
            }
            side = -1;
        }
        if bc.abs() <= noise {
            // at rounding level: close the bracket around c directly
            let delta = 0.5 * BRACKET_WIDTH;
            let (a, b) = (c - delta, c + delta);
            if a > lo.0 {
                let ba = eval(a)?;
                if ba > 0.0 {
                    lo = (a, ba);
                }
            }
            if b < hi.0 {
                let bb = eval(b)?;
                if bb < 0.0 {
                    hi = (b, bb);
                }
            }
        }
    }
    // the true lo.1/hi.1 may have been halved; pick by proximity
    let s = 0.5 * (lo.0 + hi.0);
    Ok(finish(&fiber, s, [lo.0, hi.0]))
}

fn finish(fiber: &Fiber<'_>, s: f64, bracket: [f64; 2]) -> FiberResult {
    FiberResult {
        s_star: s,
        value: fiber.action(s),
        residual: ((2.0 * s).exp() * fiber.bracket(s)).abs(),
        bracket,
    }
}

/// `J(u) = I(s(u)⋆u)`.
pub fn reduced_value(u: &GridFunction, nl: &NonlinearitySpec) -> Result<f64> {
    project(u, nl).map(|r| r.value)
}

/// Weighted-L² representative of `dJ(u)`:
/// `e^{2s}(−Δu) − e^{−Ns/2} f(e^{Ns/2} u)` with `s = s(u)`, the nonlinear
/// term taken as the grid's load vector.
pub fn reduced_gradient(u: &GridFunction, nl: &NonlinearitySpec) -> Result<GridFunction> {
    let s = project(u, nl)?.s_star;
    Ok(reduced_gradient_at(u, nl, s))
}

/// [`reduced_gradient`] with `s(u)` supplied by the caller.
pub fn reduced_gradient_at(u: &GridFunction, nl: &NonlinearitySpec, s: f64) -> GridFunction {
    let n = u.grid().dim() as f64;
    let a = (0.5 * n * s).exp();
    let e2 = (2.0 * s).exp();
    let lap = neg_laplacian_values(u.grid(), u.values());
    let load = u.grid().load(u.values(), |v| nl.f(a * v) / a);
    let values = lap.iter().zip(load).map(|(l, f)| e2 * l - f).collect();
    GridFunction::from_parts_unchecked(u.grid().clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::nonlinearity::builtin;
    use std::collections::BTreeMap;

    fn power(p: f64, dim: usize) -> NonlinearitySpec {
        let params = [("p".to_string(), p)].into_iter().collect();
        builtin("pure_power", dim, &params).unwrap()
    }

    fn gaussian(dim: usize) -> GridFunction {
        let g = make_grid(dim, 12.0, 1201, None).unwrap();
        GridFunction::from_fn(g, |r| (-r * r / 2.0).exp())
    }

    #[test]
    fn zero_profile() {
        let u = GridFunction::zeros(make_grid(3, 5.0, 64, None).unwrap());
        let nl = power(4.0, 3);
        assert_eq!(action(&u, &nl), 0.0);
        assert_eq!(pohozaev(&u, &nl), 0.0);
        assert_eq!(fiber_pohozaev(&u, &nl, 1.3), 0.0);
        assert!(matches!(project(&u, &nl), Err(Error::Domain(_))));
    }

    #[test]
    fn fiber_at_zero_matches_direct_functionals() {
        let u = gaussian(3);
        let nl = builtin("log_supercritical", 3, &BTreeMap::new()).unwrap();
        let a = action(&u, &nl);
        assert!((fiber_action(&u, &nl, 0.0) - a).abs() <= 1e-12 * a.abs());
        let p = pohozaev(&u, &nl);
        assert!((fiber_pohozaev(&u, &nl, 0.0) - p).abs() <= 1e-12 * grad_norm_sq(&u));
    }

    #[test]
    fn fiber_derivative_is_pohozaev() {
        let u = gaussian(2).scale(3.0);
        let nl = builtin("log_supercritical", 2, &BTreeMap::new()).unwrap();
        for s in [-1.0, 0.0, 0.7] {
            let h = 1e-5;
            let fd = (fiber_action(&u, &nl, s + h) - fiber_action(&u, &nl, s - h)) / (2.0 * h);
            let p = fiber_pohozaev(&u, &nl, s);
            assert!((fd - p).abs() <= 1e-6 * p.abs().max(1.0), "{fd} {p}");
        }
    }

    #[test]
    fn materialized_fiber_is_exact() {
        let u = gaussian(3);
        let nl = power(4.0, 3);
        let s = 0.37;
        let v = materialize(s, &u);
        let a = action(&v, &nl);
        assert!((a - fiber_action(&u, &nl, s)).abs() <= 1e-12 * a.abs());
        assert!((mass(&v) - mass(&u)).abs() <= 1e-13 * mass(&u));
    }

    #[test]
    fn projection_lands_on_the_manifold() {
        let u = gaussian(3);
        let nl = power(4.0, 3);
        let r = project(&u, &nl).unwrap();
        assert!(r.bracket[1] - r.bracket[0] <= BRACKET_WIDTH);
        assert!(r.residual <= 1e-10 * grad_norm_sq(&u).max(1.0), "{r:?}");
        let v = materialize(r.s_star, &u);
        let again = project(&v, &nl).unwrap();
        assert!(again.s_star.abs() < 1e-10);
        // pure power: P(s⋆u) closed form root
        let d = grad_norm_sq(&u);
        let lp = u.grid().integrate(u.values(), |v| v.powi(4));
        // D e^{2s} = (N/2)(1 − 2/p) e^{Ns(p−2)/2} ∫|u|^p
        let s = (d / (1.5 * 0.5 * lp)).ln() / (1.5 * 2.0 - 2.0);
        assert!((r.s_star - s).abs() < 1e-12, "{} {s}", r.s_star);
    }

    #[test]
    fn dilate_preserves_mass_and_scales_energy() {
        // the rule's own O(h²) error differs between u and s⋆u, so resolve finely
        let g = make_grid(3, 20.0, 40001, None).unwrap();
        let u = GridFunction::from_fn(g, |r| (-r * r / 2.0).exp());
        for s in [-1.0, -0.5, 0.5, 1.0] {
            let v = dilate(s, &u);
            assert!((mass(&v) / mass(&u) - 1.0).abs() < 1e-6, "{}", mass(&v) / mass(&u) - 1.0);
            let ratio = grad_norm_sq(&v) / grad_norm_sq(&u);
            assert!((ratio / (2.0 * s).exp() - 1.0).abs() < 1e-5, "{ratio}");
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let u = gaussian(1).scale(2.0);
        let nl = power(8.0, 1);
        let g = reduced_gradient(&u, &nl).unwrap();
        let phi = GridFunction::from_fn(u.grid().clone(), |r| r * (-r * r).exp());
        let eps = 1e-5;
        let jp = reduced_value(&u.axpy(eps, &phi), &nl).unwrap();
        let jm = reduced_value(&u.axpy(-eps, &phi), &nl).unwrap();
        let fd = (jp - jm) / (2.0 * eps);
        let an = g.dot(&phi);
        assert!((fd - an).abs() <= 1e-6 * an.abs(), "{fd} {an}");
    }

    #[test]
    fn nonconforming_nonlinearity_is_reported() {
        // mass-subcritical power in N = 3 never turns the bracket negative
        #[derive(Debug)]
        struct Sub;
        impl crate::nonlinearity::Nonlinearity for Sub {
            fn f(&self, t: f64) -> f64 {
                t.abs() * t
            }
            fn primitive(&self, t: f64) -> f64 {
                t.abs().powi(3) / 3.0
            }
        }
        let nl = NonlinearitySpec::new("sub", Arc::new(Sub), [], BTreeMap::new());
        let u = gaussian(3);
        match project(&u, &nl) {
            Err(Error::Nonconformance { hypothesis, .. }) => assert_eq!(hypothesis, "f3"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fiber_result_serializes() {
        let r = FiberResult {
            s_star: 0.5,
            value: 1.0,
            residual: 0.0,
            bracket: [0.4, 0.6],
        };
        let v = serde_json::to_value(r).unwrap();
        assert_eq!(v["bracket"][1], 0.6);
    }
}
