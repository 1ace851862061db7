//! Ground-state energy as a function of the mass.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, RadialGrid};
use crate::nonlinearity::{sobolev_exponent, Hypothesis, NonlinearitySpec};
use crate::optimizer::{descend, multistart, select_best, sphere_retract, SolveOptions, SolveReport};
use crate::oracles::sobolev_constant_closed_form;

/// Allowed increase between consecutive energies, relative to `E_m`.
pub const MONOTONE_TOL: f64 = 1e-4;
/// Required decrease between consecutive energies, relative to `E_m`.
pub const STRICT_GAP: f64 = 1e-6;
/// Blow-up verdict threshold on the small-mass log-log slope.
pub const BLOWUP_SLOPE: f64 = -0.1;
/// Largest tolerated fraction of failed points.
pub const FAILURE_FRACTION: f64 = 0.25;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepOptions {
    /// Run the warm-start chain from the smallest mass up instead of from the
    /// largest down.
    pub ascending: bool,
    /// Also run a cold multistart at every mass and keep the better result.
    pub cold_check: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            ascending: false,
            cold_check: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monotonicity {
    pub ok: bool,
    /// Largest `(E_{i+1} − E_i)/E_i`.
    pub max_violation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrictDecrease {
    pub ok: bool,
    /// Smallest `(E_i − E_{i+1})/E_i`.
    pub min_gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Blowup {
    pub ok: bool,
    pub slope: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LargeMass {
    pub estimate: f64,
    pub spread: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FloorCheck {
    pub ok: bool,
    pub floor: f64,
    /// Smallest `E_m/floor − 1`.
    pub min_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdicts {
    pub positive: bool,
    pub nonincreasing: Monotonicity,
    pub strictly_decreasing: StrictDecrease,
    /// `None` when the masses do not span two decades.
    pub small_mass_blowup: Option<Blowup>,
    pub large_mass_limit: Option<LargeMass>,
    /// Present when a mountain-pass floor applies.
    pub floor: Option<FloorCheck>,
}

impl Verdicts {
    /// Computes every verdict from `(m, E)` pairs with `m` increasing.
    pub fn assess(masses: &[f64], energies: &[f64], floor: Option<f64>) -> Verdicts {
        let mut max_violation = f64::NEG_INFINITY;
        let mut min_gap = f64::INFINITY;
        for i in 0..energies.len().saturating_sub(1) {
            let rel = (energies[i + 1] - energies[i]) / energies[i].abs();
            max_violation = max_violation.max(rel);
            min_gap = min_gap.min(-rel);
        }
        if energies.len() < 2 {
            max_violation = 0.0;
            min_gap = 0.0;
        }
        let small_mass_blowup = log_slope_smallest_decade(masses, energies).ok().map(|slope| Blowup {
            ok: slope < BLOWUP_SLOPE,
            slope,
        });
        let large_mass_limit = large_mass_estimate(energies);
        let floor = floor.map(|floor| {
            let min_margin = energies
                .iter()
                .map(|e| e / floor - 1.0)
                .fold(f64::INFINITY, f64::min);
            FloorCheck {
                ok: min_margin >= -1e-3,
                floor,
                min_margin,
            }
        });
        Verdicts {
            positive: energies.iter().all(|&e| e > 0.0),
            nonincreasing: Monotonicity {
                ok: max_violation <= MONOTONE_TOL,
                max_violation,
            },
            strictly_decreasing: StrictDecrease {
                ok: energies.len() >= 2 && min_gap >= STRICT_GAP,
                min_gap,
            },
            small_mass_blowup,
            large_mass_limit,
            floor,
        }
    }

    /// Names of the verdicts in `expected` that do not hold.
    pub fn failures(&self, expected: &[&str]) -> Vec<String> {
        expected
            .iter()
            .filter(|name| match **name {
                "positive" => !self.positive,
                "nonincreasing" => !self.nonincreasing.ok,
                "strictly_decreasing" => !self.strictly_decreasing.ok,
                "small_mass_blowup" => !self.small_mass_blowup.is_some_and(|b| b.ok),
                "floor" => !self.floor.is_some_and(|f| f.ok),
                _ => false,
            })
            .map(|s| s.to_string())
            .collect()
    }
}

/// Verdicts the theory predicts for `nl` in dimension `dim`: positivity and
/// monotonicity always, strict decrease for `N ≤ 2` or under (f5), and the
/// mountain-pass floor under (f6'). Blow-up is only claimed when the smallest
/// decade of `masses` lies below `m = 1`; above that the asymptotic regime is
/// not resolved and the slope is reported without being enforced.
pub fn expected_verdicts(nl: &NonlinearitySpec, dim: usize, masses: &[f64]) -> Vec<&'static str> {
    let mut out = vec!["positive", "nonincreasing"];
    if dim <= 2 || nl.claims(Hypothesis::F5) {
        out.push("strictly_decreasing");
    }
    let smallest = masses.iter().copied().fold(f64::INFINITY, f64::min);
    if 10.0 * smallest <= 1.0 {
        out.push("small_mass_blowup");
    }
    if dim >= 3 && nl.claims(Hypothesis::F6Prime) {
        out.push("floor");
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub mass: f64,
    pub report: Option<SolveReport>,
    /// `|E_warm − E_cold| / E` when both runs finished.
    pub warm_cold_gap: Option<f64>,
    pub error: Option<String>,
}

impl SweepPoint {
    pub fn ok(&self) -> bool {
        self.report.as_ref().is_some_and(|r| r.converged)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub masses: Vec<f64>,
    /// `NaN` where the point produced no report.
    pub energies: Vec<f64>,
    pub multipliers: Vec<f64>,
    pub converged: Vec<bool>,
    pub verdicts: Verdicts,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    /// Masses and energies of the points with a report.
    pub fn finished(&self) -> (Vec<f64>, Vec<f64>) {
        self.masses
            .iter()
            .zip(&self.energies)
            .filter(|(_, e)| e.is_finite())
            .map(|(&m, &e)| (m, e))
            .unzip()
    }

    pub fn failed_points(&self) -> usize {
        self.points.iter().filter(|p| !p.ok()).count()
    }

    /// Recomputes the verdicts, e.g. after editing `energies`.
    pub fn reassess(&mut self) {
        let floor = self.verdicts.floor.map(|f| f.floor);
        let (m, e) = self.finished();
        self.verdicts = Verdicts::assess(&m, &e, floor);
    }

    /// CSV with header `m,E,mu,converged`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["m", "E", "mu", "converged"])?;
        for i in 0..self.masses.len() {
            w.write_record([
                format!("{:e}", self.masses[i]),
                format!("{:e}", self.energies[i]),
                format!("{:e}", self.multipliers[i]),
                self.converged[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `E_m` over `masses` (strictly increasing, positive).
///
/// A warm-start chain runs through the masses, by default from the largest
/// down, each descent starting from the previous minimizer rescaled to the
/// next mass. Small masses sit at large fiber shifts, and starting them cold
/// can overrun the projection's dilation cap. With
/// `sweep_opts.cold_check` every mass also gets an independent multistart
/// and the better of the two results is kept. Per-point failures are
/// recorded; the sweep errors only when more than a quarter of the points
/// fail.
pub fn sweep(
    grid: &Arc<RadialGrid>,
    nl: &NonlinearitySpec,
    masses: &[f64],
    opts: &SolveOptions,
    sweep_opts: &SweepOptions,
) -> Result<SweepResult> {
    if masses.is_empty() {
        return Err(Error::Config("sweep needs at least one mass".into()));
    }
    if masses.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
        return Err(Error::Config("sweep masses must be positive".into()));
    }
    if masses.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("sweep masses must be strictly increasing".into()));
    }
    opts.validate()?;
    let with_mass = |m: f64| SolveOptions {
        mass: m,
        ..opts.clone()
    };

    let cold: Vec<Option<Result<SolveReport>>> = if sweep_opts.cold_check {
        masses
            .par_iter()
            .map(|&m| Some(multistart(grid, nl, &with_mass(m))))
            .collect()
    } else {
        masses.iter().map(|_| None).collect()
    };

    let order: Vec<usize> = if sweep_opts.ascending {
        (0..masses.len()).collect()
    } else {
        (0..masses.len()).rev().collect()
    };
    let mut warm: Vec<Option<Result<SolveReport>>> = masses.iter().map(|_| None).collect();
    let mut seed_profile: Option<GridFunction> = None;
    for &i in &order {
        let o = with_mass(masses[i]);
        let run = match &seed_profile {
            Some(u) => sphere_retract(u, masses[i]).and_then(|u0| descend(u0, nl, &o)),
            None => {
                // the first warm point is the cold run when one exists
                match &cold[i] {
                    Some(Ok(r)) => Ok(r.clone()),
                    _ => multistart(grid, nl, &o),
                }
            }
        };
        if let Ok(r) = &run {
            seed_profile = Some(r.gauge_profile().clone());
        }
        warm[i] = Some(run);
    }

    let mut points = Vec::with_capacity(masses.len());
    for (i, (w, c)) in warm.into_iter().zip(cold).enumerate() {
        let mut runs = Vec::new();
        let mut energies = Vec::new();
        for run in [w, c].into_iter().flatten() {
            if let Ok(r) = &run {
                energies.push(r.energy);
            }
            runs.push(run);
        }
        let warm_cold_gap = (energies.len() == 2)
            .then(|| (energies[0] - energies[1]).abs() / energies[0].abs().min(energies[1].abs()));
        let point = match select_best(runs) {
            Ok(report) => SweepPoint {
                mass: masses[i],
                report: Some(report),
                warm_cold_gap,
                error: None,
            },
            Err(e) => SweepPoint {
                mass: masses[i],
                report: None,
                warm_cold_gap,
                error: Some(e.to_string()),
            },
        };
        points.push(point);
    }

    let failed = points.iter().filter(|p| !p.ok()).count();
    if failed as f64 > FAILURE_FRACTION * masses.len() as f64 {
        let first = points
            .iter()
            .find(|p| !p.ok())
            .map(|p| match &p.error {
                Some(e) => format!("m = {}: {e}", p.mass),
                None => format!("m = {}: not converged", p.mass),
            })
            .unwrap_or_default();
        return Err(Error::Insufficient(format!(
            "{failed} of {} sweep points failed (first: {first})",
            masses.len()
        )));
    }

    let pick = |f: fn(&SolveReport) -> f64| -> Vec<f64> {
        points
            .iter()
            .map(|p| p.report.as_ref().map_or(f64::NAN, f))
            .collect()
    };
    let energies = pick(|r| r.energy);
    let multipliers = pick(|r| r.multiplier);
    let converged = points.iter().map(|p| p.ok()).collect();
    let floor = if grid.dim() >= 3 && nl.claims(Hypothesis::F6Prime) {
        Some(mountain_pass_floor(grid, nl)?)
    } else {
        None
    };
    let mut result = SweepResult {
        masses: masses.to_vec(),
        energies,
        multipliers,
        converged,
        verdicts: Verdicts::assess(&[], &[], None),
        points,
    };
    let (m, e) = result.finished();
    result.verdicts = Verdicts::assess(&m, &e, floor);
    Ok(result)
}

/// `n` masses log-spaced from `lo` to `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) || n < 2 {
        return Err(Error::Config(format!(
            "need 0 < lo < hi and at least two points, got lo = {lo}, hi = {hi}, n = {n}"
        )));
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|i| match i {
            0 => lo,
            _ if i == n - 1 => hi,
            _ => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect())
}

/// `sup F(t)/|t|^{2*}` over `|t|` log-sampled while `|t|^{2*}` stays a
/// normal float, and from `1e-300^(1/2*)` to `1e8`.
fn critical_ratio_sup(nl: &NonlinearitySpec, dim: usize) -> Result<f64> {
    let crit = sobolev_exponent(dim);
    let t_min = (1e-290f64).powf(1.0 / crit);
    let (a, b) = (t_min.ln(), 1e8f64.ln());
    let n = 4000;
    let mut sup = 0.0f64;
    let mut arg = 0;
    for i in 0..=n {
        let t = (a + (b - a) * i as f64 / n as f64).exp();
        for x in [t, -t] {
            let q = nl.primitive(x) / x.abs().powf(crit);
            if !q.is_finite() {
                return Err(Error::Nonconformance {
                    hypothesis: "f6'".into(),
                    detail: format!("F(t)/|t|^2* not finite at t = {x:e}"),
                });
            }
            if q > sup {
                sup = q;
                arg = i;
            }
        }
    }
    if arg == n {
        return Err(Error::Nonconformance {
            hypothesis: "f6'".into(),
            detail: "F(t)/|t|^2* still growing at the sampling limit".into(),
        });
    }
    if !(sup > 0.0) {
        return Err(Error::Nonconformance {
            hypothesis: "f6'".into(),
            detail: "F(t)/|t|^2* has no positive values".into(),
        });
    }
    Ok(sup)
}

/// Lower bound for the ground-state energies from the critical comparison
/// problem: with `F ≤ K|t|^{2*}`, every `E_m ≥ (1/N) S^{N/2} (2*K)^{−(N−2)/2}`,
/// which is `(1/N) S^{N/2}` when `K = 1/2*`.
pub fn mountain_pass_floor(grid: &RadialGrid, nl: &NonlinearitySpec) -> Result<f64> {
    let dim = grid.dim();
    if dim < 3 {
        return Err(Error::Domain(
            "the mountain-pass floor needs N >= 3 (finite critical exponent)".into(),
        ));
    }
    let k = critical_ratio_sup(nl, dim)?;
    Ok(critical_floor(dim, k))
}

/// `(1/N) S^{N/2} (2*K)^{−(N−2)/2}`.
pub fn critical_floor(dim: usize, k: f64) -> f64 {
    let n = dim as f64;
    let s = sobolev_constant_closed_form(dim);
    s.powf(n / 2.0) / n * (sobolev_exponent(dim) * k).powf(-(n - 2.0) / 2.0)
}

/// Least-squares slope of `ln E` against `ln m` over the smallest decade of
/// masses. Needs masses spanning at least two decades and two points in the
/// smallest one.
pub fn log_slope_smallest_decade(masses: &[f64], energies: &[f64]) -> Result<f64> {
    if masses.len() != energies.len() || masses.len() < 2 {
        return Err(Error::Insufficient("need at least two (m, E) pairs".into()));
    }
    let lo = masses.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = masses.iter().copied().fold(0.0, f64::max);
    if !(hi >= 100.0 * lo * (1.0 - 1e-12)) {
        return Err(Error::Insufficient(format!(
            "masses span {lo:e}..{hi:e}, less than two decades"
        )));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = masses
        .iter()
        .zip(energies)
        .filter(|(&m, &e)| m <= 10.0 * lo * (1.0 + 1e-12) && e > 0.0)
        .map(|(&m, &e)| (m.ln(), e.ln()))
        .unzip();
    if x.len() < 2 {
        return Err(Error::Insufficient(
            "fewer than two positive energies in the smallest decade".into(),
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    Ok(sxy / sxx)
}

/// Small-mass slope of a sweep.
pub fn small_mass_diagnostic(result: &SweepResult) -> Result<f64> {
    let (m, e) = result.finished();
    log_slope_smallest_decade(&m, &e)
}

/// Mean of the energies at the three largest masses, with their spread
/// (max − min) as the uncertainty.
pub fn large_mass_estimate(energies: &[f64]) -> Option<LargeMass> {
    if energies.len() < 3 {
        return None;
    }
    let tail = &energies[energies.len() - 3..];
    let estimate = tail.iter().sum::<f64>() / 3.0;
    let spread = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - tail.iter().copied().fold(f64::INFINITY, f64::min);
    Some(LargeMass { estimate, spread })
}

/// One-line bar rendering of `values`, scaled between their min and max.
pub fn sparkline(values: &[f64]) -> String {
    const BARS: [char; 8] = ['▁', '▂', '▃', '▄', '▅', '▆', '▇', '█'];
    let finite = values.iter().copied().filter(|v| v.is_finite());
    let lo = finite.clone().fold(f64::INFINITY, f64::min);
    let hi = finite.fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .map(|&v| {
            if !v.is_finite() {
                ' '
            } else if hi > lo {
                let k = ((v - lo) / (hi - lo) * 7.0).round() as usize;
                BARS[k.min(7)]
            } else {
                BARS[3]
            }
        })
        .collect()
}
