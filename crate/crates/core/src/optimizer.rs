//! Minimization of the reduced functional `J(u) = I(s(u)⋆u)` on the mass
//! sphere `S_m = {‖u‖² = m}`.
//!
//! Each iteration computes the gradient of `J`, turns it into a tangent
//! descent direction, and backtracks along the retraction `u ↦ √(m/‖u‖²)·u`
//! until the Armijo condition holds. By default the direction is the
//! Riemannian gradient for the metric `⟨(e^{2s}(−Δ) + σ)·,·⟩_w`, which makes the
//! iteration count independent of the grid size; the plain weighted-L²
//! gradient is available as [`Metric::L2`].
//!
//! The iterate lives in a free dilation gauge: `J` is blind to `s⋆u`, so only
//! the profile's shape has to be resolved by the grid. The converged profile
//! is mapped back to the physical scale exactly by [`materialize`].

use std::path::PathBuf;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::{action, materialize, pohozaev, project, project_from, reduced_gradient_at};
use crate::grid::{grad_norm_sq, mass, neg_laplacian, GridFunction, RadialGrid};
use crate::nonlinearity::NonlinearitySpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Armijo {
    pub backtrack: f64,
    pub decrease: f64,
}

impl Default for Armijo {
    fn default() -> Self {
        Armijo {
            backtrack: 0.5,
            decrease: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Init {
    Gaussian,
    /// Values on the solver grid.
    Custom { values: Vec<f64> },
    /// An `r,u` profile CSV.
    Restart { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Sobolev,
    L2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    pub mass: f64,
    pub max_iters: usize,
    /// Threshold on `√(−⟨∇J, d⟩/|J|)`, `d` the descent direction.
    pub grad_tol: f64,
    pub armijo: Armijo,
    pub init: Init,
    pub seed: u64,
    /// Replicas in [`multistart`]; replica 0 starts unperturbed.
    pub restarts: usize,
    /// Amplitude of the smooth multiplicative perturbation of restarts.
    pub noise: f64,
    /// Replace the iterate by `|u|` every 50 iterations.
    pub symmetrize: bool,
    pub metric: Metric,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            mass: 1.0,
            max_iters: 5000,
            grad_tol: 1e-7,
            armijo: Armijo::default(),
            init: Init::Gaussian,
            seed: 0,
            restarts: 5,
            noise: 0.2,
            symmetrize: false,
            metric: Metric::Sobolev,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return bad(format!("mass must be positive, got {}", self.mass));
        }
        if !(self.grad_tol > 0.0) {
            return bad(format!("grad_tol must be positive, got {}", self.grad_tol));
        }
        let a = self.armijo;
        if !(a.backtrack > 0.0 && a.backtrack < 1.0) {
            return bad(format!("armijo backtrack must lie in (0, 1), got {}", a.backtrack));
        }
        if !(a.decrease > 0.0 && a.decrease < 0.5) {
            return bad(format!("armijo decrease must lie in (0, 1/2), got {}", a.decrease));
        }
        if !(0.0..0.45).contains(&self.noise) {
            return bad(format!("noise must lie in [0, 0.45), got {}", self.noise));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    /// `J(u_k)`
    pub value: f64,
    /// `‖tangent_project(∇J(u_k))‖_w`
    pub grad_norm: f64,
    /// Accepted step length (0 for the final entry).
    pub step: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    /// Converged profile at its physical scale, on the solver grid scaled by
    /// `e^{-fiber_shift}`.
    #[serde(skip)]
    pub profile: Option<GridFunction>,
    /// The same profile before the final dilation, on the solver grid.
    #[serde(skip)]
    pub gauge_profile: Option<GridFunction>,
    pub mass: f64,
    pub energy: f64,
    pub multiplier: f64,
    /// `‖−Δu + μu − f(u)‖_w / (‖u‖_w · max(1, ‖∇u‖²/m, |μ|))`
    pub pde_residual: f64,
    pub pohozaev_residual: f64,
    pub boundary_tail: f64,
    pub fiber_shift: f64,
    /// Last value of the stopping quantity `√(−⟨∇J, d⟩/|J|)`.
    pub stationarity: f64,
    pub iterations: usize,
    pub converged: bool,
    pub replica: usize,
    pub seed: u64,
    pub trace: Vec<TraceEntry>,
}

impl SolveReport {
    pub fn profile(&self) -> &GridFunction {
        self.profile.as_ref().expect("report carries a profile")
    }

    pub fn gauge_profile(&self) -> &GridFunction {
        self.gauge_profile.as_ref().expect("report carries a profile")
    }

    pub fn grad_norm_sq(&self) -> f64 {
        grad_norm_sq(self.profile())
    }
}

/// Starting profile of mass `m`.
///
/// `noise > 0` multiplies the profile by `1 + noise·Σ_k a_k cos(kπr/4)/k`,
/// `k = 1..4`, with `a_k` uniform in `[−1, 1]` drawn from `seed`.
pub fn initial_profile(
    grid: &Arc<RadialGrid>,
    m: f64,
    init: &Init,
    seed: u64,
    noise: f64,
) -> Result<GridFunction> {
    let base = match init {
        Init::Gaussian => GridFunction::from_fn(grid.clone(), |r| (-r * r).exp()),
        Init::Custom { values } => {
            let mut u = GridFunction::new(grid.clone(), values.clone())?;
            *u.values_mut().last_mut().unwrap() = 0.0;
            u
        }
        Init::Restart { path } => {
            let file = std::fs::File::open(path)?;
            let mut u = GridFunction::read_csv(file, grid.clone())?;
            *u.values_mut().last_mut().unwrap() = 0.0;
            u
        }
    };
    if mass(&base) <= 0.0 {
        return Err(Error::Insufficient("initial profile has zero mass".into()));
    }
    let base = if noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let nodes = grid.nodes().to_vec();
        let mut u = base;
        for (v, r) in u.values_mut().iter_mut().zip(&nodes) {
            let bump: f64 = a
                .iter()
                .enumerate()
                .map(|(k, ak)| {
                    let k = (k + 1) as f64;
                    ak * (k * std::f64::consts::PI * r / 4.0).cos() / k
                })
                .sum();
            *v *= 1.0 + noise * bump;
        }
        u
    } else {
        base
    };
    sphere_retract(&base, m)
}

/// `√(m/‖u‖²)·u`.
pub fn sphere_retract(u: &GridFunction, m: f64) -> Result<GridFunction> {
    let current = mass(u);
    if !(current > 0.0) {
        return Err(Error::Domain("cannot retract the zero profile".into()));
    }
    let ratio = m / current;
    if (ratio - 1.0).abs() <= 4.0 * f64::EPSILON {
        // already on the sphere to rounding: keep the bits
        return Ok(u.clone());
    }
    Ok(u.scale(ratio.sqrt()))
}

/// `g − (⟨g,u⟩_w/m)·u`.
pub fn tangent_project(g: &GridFunction, u: &GridFunction, m: f64) -> GridFunction {
    g.axpy(-g.dot(u) / m, u)
}

/// `(∫f(u)u − ‖∇u‖²)/m`.
pub fn multiplier(u: &GridFunction, nl: &NonlinearitySpec, m: f64) -> f64 {
    let fu = u.grid().integrate(u.values(), |v| nl.f(v) * v);
    (fu - grad_norm_sq(u)) / m
}

/// Scale-free norm of `−Δu + μu − f(u)`, with `f(u)` as the grid's load vector.
pub fn pde_residual(u: &GridFunction, nl: &NonlinearitySpec, mu: f64) -> f64 {
    let lap = neg_laplacian(u);
    let load = u.grid().load(u.values(), |v| nl.f(v));
    let values: Vec<f64> = lap
        .values()
        .iter()
        .zip(u.values())
        .zip(load)
        .map(|((l, &v), f)| l + mu * v - f)
        .collect();
    let r = GridFunction::new(u.grid().clone(), values)
        .map(|g| g.norm())
        .unwrap_or(f64::INFINITY);
    let m = mass(u);
    r / (m.sqrt() * 1f64.max(grad_norm_sq(u) / m).max(mu.abs()))
}

struct State {
    u: GridFunction,
    s: f64,
    value: f64,
    grad: GridFunction,
    /// Tangent dilation generator `(N/2)u + r·u'` at `u`.
    xi: GridFunction,
}

impl State {
    fn new(u: GridFunction, nl: &NonlinearitySpec, hint: Option<f64>) -> Result<State> {
        let fiber = match hint {
            Some(s) => project_from(&u, nl, s, 1e-3)?,
            None => project(&u, nl)?,
        };
        let grad = reduced_gradient_at(&u, nl, fiber.s_star);
        let xi = dilation_generator(&u);
        Ok(State {
            u,
            s: fiber.s_star,
            value: fiber.value,
            grad,
            xi,
        })
    }

    /// Coefficients `(σ, a)` of the metric operator `a(−Δ) + σ`.
    fn metric(&self, m: f64, metric: Metric, mu: f64) -> (f64, f64) {
        match metric {
            Metric::L2 => (1.0, 0.0),
            Metric::Sobolev => {
                let a = (2.0 * self.s).exp();
                (mu.max(0.1 * a * grad_norm_sq(&self.u) / m), a)
            }
        }
    }

    /// The metric operator applied to the dilation generator.
    fn metric_xi(&self, sigma: f64, a: f64) -> GridFunction {
        if a == 0.0 {
            self.xi.scale(sigma)
        } else {
            neg_laplacian(&self.xi).scale(a).axpy(sigma, &self.xi)
        }
    }

    /// `−⟨∇J,u⟩/m`, the multiplier estimate.
    fn mu(&self, m: f64) -> f64 {
        -self.grad.dot(&self.u) / m
    }
}

/// `√(−⟨∇J, d⟩ / |J|)`: the relative decrease of `J` still available along
/// the descent direction `d`, in the metric the descent uses.
fn stationarity(state: &State, d: &GridFunction) -> f64 {
    let decrement = -state.grad.dot(d);
    (decrement.max(0.0) / state.value.abs().max(f64::MIN_POSITIVE)).sqrt()
}

/// `(N/2)u + r·u'` by central differences, made weighted-orthogonal to `u`.
///
/// On a fixed grid the discrete `J` is dilation invariant only up to the
/// discretization error, and left alone the iterate drifts along this
/// direction toward under-resolved profiles. The descent is kept off it.
fn dilation_generator(u: &GridFunction) -> GridFunction {
    let grid = u.grid();
    let r = grid.nodes();
    let v = u.values();
    let k = v.len();
    let half_n = 0.5 * grid.dim() as f64;
    let mut xi = vec![0.0; k];
    xi[0] = half_n * v[0];
    for i in 1..k - 1 {
        let slope = (v[i + 1] - v[i - 1]) / (r[i + 1] - r[i - 1]);
        xi[i] = half_n * v[i] + r[i] * slope;
    }
    let xi = GridFunction::from_parts_unchecked(grid.clone(), xi);
    let m = mass(u);
    tangent_project(&xi, u, m)
}

/// Tangent descent direction, kept off the dilation orbit, and the metric
/// operator's coefficients `(σ, a)`.
fn direction(state: &State, m: f64, metric: Metric, mu: f64) -> (GridFunction, f64, f64) {
    let u = &state.u;
    let xi = &state.xi;
    let (sigma, a) = state.metric(m, metric, mu);
    let d = match metric {
        Metric::L2 => tangent_project(&state.grad, u, m).scale(-1.0),
        Metric::Sobolev => {
            let grid = u.grid();
            let z = grid.shifted_laplacian_solve(a, sigma, state.grad.values());
            let y = grid.shifted_laplacian_solve(a, sigma, u.values());
            let z = GridFunction::from_parts_unchecked(grid.clone(), z);
            let y = GridFunction::from_parts_unchecked(grid.clone(), y);
            let c = u.dot(&z) / u.dot(&y);
            z.axpy(-c, &y).scale(-1.0)
        }
    };
    let p_xi = state.metric_xi(sigma, a);
    let xx = p_xi.dot(xi);
    let d = if xx > 0.0 { d.axpy(-p_xi.dot(&d) / xx, xi) } else { d };
    (d, sigma, a)
}

/// One descent run from `u0` (already on `S_m`).
pub fn descend(u0: GridFunction, nl: &NonlinearitySpec, opts: &SolveOptions) -> Result<SolveReport> {
    opts.validate()?;
    let m = opts.mass;
    let mut state = State::new(sphere_retract(&u0, m)?, nl, None)?;
    let mut trace = Vec::new();
    let mut previous: Option<(GridFunction, GridFunction)> = None;
    let mut converged = false;
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    for k in 0..opts.max_iters {
        iterations = k;
        let mu = state.mu(m);
        let grad_norm = tangent_project(&state.grad, &state.u, m).norm();
        let (d, sigma, a) = direction(&state, m, opts.metric, mu);
        residual = stationarity(&state, &d);
        if residual <= opts.grad_tol {
            converged = true;
            trace.push(TraceEntry {
                iteration: k,
                value: state.value,
                grad_norm,
                step: 0.0,
            });
            break;
        }
        if opts.symmetrize && k > 0 && k % 50 == 0 {
            let abs = state.u.map(f64::abs);
            state = State::new(abs, nl, Some(state.s))?;
            previous = None;
            continue;
        }
        let slope = state.grad.dot(&d);
        if !(slope < 0.0) {
            // no descent available at working precision
            break;
        }
        let mut tau = match (&previous, opts.metric) {
            (Some((du, dg)), metric) => {
                let denom = du.dot(dg);
                let num = match metric {
                    Metric::Sobolev => a * grad_norm_sq(du) + sigma * du.dot(du),
                    Metric::L2 => du.dot(du),
                };
                if denom > 0.0 && num > 0.0 {
                    (num / denom).clamp(1e-6, 1e2)
                } else {
                    1.0
                }
            }
            (None, _) => 1.0,
        };
        let mut accepted = None;
        for _ in 0..60 {
            let trial = sphere_retract(&state.u.axpy(tau, &d), m)?;
            match State::new(trial, nl, Some(state.s)) {
                Ok(next) => {
                    if !next.value.is_finite() {
                        return Err(Error::NonFinite {
                            iteration: k,
                            step: tau,
                            dump: state.u.values().to_vec(),
                        });
                    }
                    if next.value <= state.value + opts.armijo.decrease * tau * slope {
                        accepted = Some(next);
                        break;
                    }
                }
                Err(Error::Nonconformance { .. }) if tau > 1e-12 => {}
                Err(e) => return Err(e),
            }
            tau *= opts.armijo.backtrack;
        }
        let Some(next) = accepted else {
            // line search exhausted: stalled at rounding level
            break;
        };
        trace.push(TraceEntry {
            iteration: k,
            value: state.value,
            grad_norm,
            step: tau,
        });
        let du = next.u.axpy(-1.0, &state.u);
        let dg = next.grad.axpy(-1.0, &state.grad);
        previous = Some((du, dg));
        state = next;
        iterations = k + 1;
    }
    if !converged {
        let grad_norm = tangent_project(&state.grad, &state.u, m).norm();
        trace.push(TraceEntry {
            iteration: iterations,
            value: state.value,
            grad_norm,
            step: 0.0,
        });
    }
    finish(state, nl, opts, trace, iterations, converged, residual)
}

fn finish(
    state: State,
    nl: &NonlinearitySpec,
    opts: &SolveOptions,
    trace: Vec<TraceEntry>,
    iterations: usize,
    converged: bool,
    stationarity: f64,
) -> Result<SolveReport> {
    let m = opts.mass;
    let profile = materialize(state.s, &state.u);
    let energy = action(&profile, nl);
    let mu = multiplier(&profile, nl, m);
    let k = profile.values().len();
    Ok(SolveReport {
        mass: mass(&profile),
        energy,
        multiplier: mu,
        pde_residual: pde_residual(&profile, nl, mu),
        pohozaev_residual: pohozaev(&profile, nl).abs(),
        boundary_tail: profile.values()[k - 2].abs(),
        fiber_shift: state.s,
        stationarity,
        iterations,
        converged,
        replica: 0,
        seed: opts.seed,
        trace,
        profile: Some(profile),
        gauge_profile: Some(state.u),
    })
}

/// Single descent from the configured initial profile.
pub fn minimize(
    grid: &Arc<RadialGrid>,
    nl: &NonlinearitySpec,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    opts.validate()?;
    let u0 = initial_profile(grid, opts.mass, &opts.init, opts.seed, 0.0)?;
    descend(u0, nl, opts)
}

/// `opts.restarts` replicas in parallel; replica `k > 0` starts from the
/// initial profile perturbed with seed `opts.seed + k`. Returns the lowest
/// energy among converged replicas (lowest index on ties), or among all
/// replicas when none converged.
pub fn multistart(
    grid: &Arc<RadialGrid>,
    nl: &NonlinearitySpec,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    opts.validate()?;
    let n = opts.restarts.max(1);
    let runs: Vec<Result<SolveReport>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let seed = opts.seed.wrapping_add(k as u64);
            let noise = if k == 0 { 0.0 } else { opts.noise };
            let u0 = initial_profile(grid, opts.mass, &opts.init, seed, noise)?;
            let mut report = descend(u0, nl, opts)?;
            report.replica = k;
            report.seed = seed;
            Ok(report)
        })
        .collect();
    select_best(runs)
}

pub(crate) fn select_best(runs: Vec<Result<SolveReport>>) -> Result<SolveReport> {
    let mut best: Option<SolveReport> = None;
    let mut first_err = None;
    for run in runs {
        match run {
            Ok(r) => {
                let better = match &best {
                    None => true,
                    Some(b) => {
                        (r.converged && !b.converged)
                            || (r.converged == b.converged && r.energy < b.energy)
                    }
                };
                if better {
                    best = Some(r);
                }
            }
            Err(e) => {
                if first_err.is_none() {
                    first_err = Some(e);
                }
            }
        }
    }
    match (best, first_err) {
        (Some(b), _) => Ok(b),
        (None, Some(e)) => Err(e),
        (None, None) => Err(Error::Insufficient("no replicas were run".into())),
    }
}
