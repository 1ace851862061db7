//! Sampling-based certification of the structural hypotheses on `f`.
//!
//! Limits are judged from a log-spaced sample: a log-log slope regression over
//! the last four decades toward the limit point, and when the slope is flat,
//! the pattern of per-decade increments (geometric decay means a finite limit,
//! constant increments mean logarithmic growth). Monotonicity and pointwise
//! inequalities are scanned directly. The verdicts are evidence, not proofs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{mass_critical_exponent, sobolev_exponent, Hypothesis, NonlinearitySpec};

/// Slope magnitude separating power-law behaviour from a flat quotient.
const SLOPE_THRESHOLD: f64 = 0.1;
/// Number of decades at each end used for the limit regressions.
const TAIL_DECADES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub t: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionEntry {
    pub verdict: Verdict,
    pub witnesses: Vec<Witness>,
    pub method: String,
}

/// Log-spaced sample of `|t|` in `[t_min, t_max]`, used with both signs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub t_min: f64,
    pub t_max: f64,
    pub per_decade: usize,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling {
            t_min: 1e-8,
            t_max: 1e8,
            per_decade: 20,
        }
    }
}

impl Sampling {
    fn points(&self) -> Vec<f64> {
        let lo = self.t_min.log10();
        let hi = self.t_max.log10();
        let n = ((hi - lo) * self.per_decade as f64).round() as usize;
        (0..=n)
            .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / n as f64))
            .collect()
    }

    fn valid(&self) -> bool {
        self.t_min > 0.0
            && self.t_min <= 1e-6
            && self.t_max >= 1e6
            && self.t_max.is_finite()
            && self.per_decade >= 2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub nonlinearity: String,
    pub dim: usize,
    pub sampling: Sampling,
    pub hypotheses: BTreeMap<Hypothesis, ConditionEntry>,
}

impl ConditionReport {
    pub fn verdict(&self, h: Hypothesis) -> Verdict {
        self.hypotheses
            .get(&h)
            .map(|e| e.verdict)
            .unwrap_or(Verdict::Inconclusive)
    }

    /// Fail if any listed hypothesis fails, else inconclusive if any is, else pass.
    pub fn combined(&self, hs: &[Hypothesis]) -> Verdict {
        let vs: Vec<Verdict> = hs.iter().map(|&h| self.verdict(h)).collect();
        if vs.contains(&Verdict::Fail) {
            Verdict::Fail
        } else if vs.contains(&Verdict::Inconclusive) {
            Verdict::Inconclusive
        } else {
            Verdict::Pass
        }
    }

    pub fn failing(&self) -> Vec<Hypothesis> {
        self.hypotheses
            .iter()
            .filter(|(_, e)| e.verdict == Verdict::Fail)
            .map(|(h, _)| *h)
            .collect()
    }
}

/// Behaviour of a quotient as its argument approaches a limit point.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Tail {
    /// `|Q| ~ d^σ` where `d → ∞` measures closeness to the limit.
    Power(f64),
    Converges(f64),
    LogGrowth,
    Unclear,
}

/// `xs` increase toward the limit (log of closeness), one value per sample.
fn classify_tail(xs: &[f64], qs: &[f64], per_decade: usize) -> Tail {
    if qs.iter().any(|q| !q.is_finite()) {
        return Tail::Unclear;
    }
    if qs.iter().all(|&q| q == 0.0) {
        return Tail::Converges(0.0);
    }
    let same_sign = qs.iter().all(|&q| q > 0.0) || qs.iter().all(|&q| q < 0.0);
    if same_sign {
        let ys: Vec<f64> = qs.iter().map(|q| q.abs().ln()).collect();
        let slope = regression_slope(xs, &ys);
        if slope.abs() >= SLOPE_THRESHOLD {
            return Tail::Power(slope);
        }
    }
    let decades: Vec<f64> = qs.iter().step_by(per_decade).copied().collect();
    if decades.len() < 4 {
        return Tail::Unclear;
    }
    let scale = qs.iter().fold(0.0f64, |m, q| m.max(q.abs()));
    let diffs: Vec<f64> = decades.windows(2).map(|w| w[1] - w[0]).collect();
    if diffs.iter().all(|d| d.abs() <= 1e-9 * scale) {
        return Tail::Converges(*decades.last().unwrap());
    }
    if diffs.contains(&0.0) {
        return Tail::Unclear;
    }
    let ratios: Vec<f64> = diffs.windows(2).map(|w| w[1] / w[0]).collect();
    if ratios.iter().all(|&r| (0.0..=0.8).contains(&r)) {
        let r = *ratios.last().unwrap();
        let d = *diffs.last().unwrap();
        return Tail::Converges(decades.last().unwrap() + d * r / (1.0 - r));
    }
    if diffs.iter().all(|&d| d > 0.0) && ratios.iter().all(|&r| (0.8..=1.25).contains(&r)) {
        return Tail::LogGrowth;
    }
    Tail::Unclear
}

fn regression_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[derive(Clone, Copy, PartialEq)]
enum Limit {
    Zero,
    Infinity,
}

#[derive(Clone, Copy, PartialEq)]
enum Claim {
    /// `Q → 0`
    Vanishes,
    /// `Q → +∞`
    Diverges,
    /// `limsup |Q| < ∞`
    Bounded,
}

struct Sampler<'a> {
    points: &'a [f64],
    per_decade: usize,
}

impl Sampler<'_> {
    fn tail_window(&self, limit: Limit) -> Vec<f64> {
        let n = TAIL_DECADES * self.per_decade + 1;
        let n = n.min(self.points.len());
        match limit {
            // ordered toward the limit point
            Limit::Zero => self.points[..n].iter().rev().copied().collect(),
            Limit::Infinity => self.points[self.points.len() - n..].to_vec(),
        }
    }

    fn judge_limit(
        &self,
        q: impl Fn(f64) -> f64,
        limit: Limit,
        claim: Claim,
        label: &str,
    ) -> ConditionEntry {
        let mut witnesses = Vec::new();
        let mut verdicts = Vec::new();
        let mut notes = Vec::new();
        for sign in [1.0, -1.0] {
            let ts: Vec<f64> = self.tail_window(limit).into_iter().map(|t| sign * t).collect();
            let xs: Vec<f64> = ts
                .iter()
                .map(|t| match limit {
                    Limit::Zero => -t.abs().ln(),
                    Limit::Infinity => t.abs().ln(),
                })
                .collect();
            let qs: Vec<f64> = ts.iter().map(|&t| q(t)).collect();
            for &i in &[0, ts.len() - 1] {
                witnesses.push(Witness { t: ts[i], value: qs[i] });
            }
            let tail = classify_tail(&xs, &qs, self.per_decade);
            let peak = qs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let positive = qs.iter().all(|&v| v > 0.0);
            let v = match (claim, tail) {
                (_, Tail::Unclear) => Verdict::Inconclusive,
                (Claim::Vanishes, Tail::Power(s)) if s < 0.0 => Verdict::Pass,
                (Claim::Vanishes, Tail::Converges(l)) if l.abs() <= 1e-3 * peak => Verdict::Pass,
                (Claim::Vanishes, _) => Verdict::Fail,
                (Claim::Diverges, Tail::Power(s)) if s > 0.0 && positive => Verdict::Pass,
                (Claim::Diverges, Tail::LogGrowth) if positive => Verdict::Pass,
                (Claim::Diverges, _) => Verdict::Fail,
                (Claim::Bounded, Tail::Power(s)) if s < 0.0 => Verdict::Pass,
                (Claim::Bounded, Tail::Converges(_)) => Verdict::Pass,
                (Claim::Bounded, _) => Verdict::Fail,
            };
            notes.push(format!(
                "{}: {}",
                if sign > 0.0 { "t>0" } else { "t<0" },
                describe(tail)
            ));
            verdicts.push(v);
        }
        let verdict = if verdicts.contains(&Verdict::Fail) {
            Verdict::Fail
        } else if verdicts.contains(&Verdict::Inconclusive) {
            Verdict::Inconclusive
        } else {
            Verdict::Pass
        };
        ConditionEntry {
            verdict,
            witnesses,
            method: format!(
                "{label}; tail over {TAIL_DECADES} decades toward {}: {}",
                match limit {
                    Limit::Zero => "0",
                    Limit::Infinity => "infinity",
                },
                notes.join(", ")
            ),
        }
    }
}

fn describe(tail: Tail) -> String {
    match tail {
        Tail::Power(s) => format!("power law, slope {s:.4}"),
        Tail::Converges(l) => format!("converges to {l:.6e}"),
        Tail::LogGrowth => "logarithmic growth".into(),
        Tail::Unclear => "unclear".into(),
    }
}

fn vacuous(reason: &str) -> ConditionEntry {
    ConditionEntry {
        verdict: Verdict::Pass,
        witnesses: Vec::new(),
        method: format!("vacuous: {reason}"),
    }
}

/// Scans `q` along `ts` (ordered) for violations of monotone increase.
/// Returns the first offending pair.
fn monotone_violation(
    ts: &[f64],
    q: impl Fn(f64) -> f64,
    strict: bool,
    rel_tol: f64,
) -> Option<(Witness, Witness)> {
    let mut prev: Option<(f64, f64)> = None;
    for &t in ts {
        let v = q(t);
        if let Some((pt, pv)) = prev {
            let slack = rel_tol * pv.abs().max(v.abs());
            let bad = if strict { v <= pv } else { v < pv - slack };
            if bad || !v.is_finite() {
                return Some((Witness { t: pt, value: pv }, Witness { t, value: v }));
            }
        }
        prev = Some((t, v));
    }
    None
}

/// Runs every hypothesis check for dimension `dim`.
pub fn check_conditions(nl: &NonlinearitySpec, dim: usize, sampling: Sampling) -> ConditionReport {
    let sampling = if sampling.valid() {
        sampling
    } else {
        Sampling {
            t_min: sampling.t_min.clamp(f64::MIN_POSITIVE, 1e-6),
            t_max: sampling.t_max.max(1e6),
            per_decade: sampling.per_decade.max(2),
        }
    };
    let points = sampling.points();
    let sampler = Sampler {
        points: &points,
        per_decade: sampling.per_decade,
    };
    let q = mass_critical_exponent(dim);
    let crit = sobolev_exponent(dim);
    let mut out = BTreeMap::new();

    out.insert(Hypothesis::F0, check_continuity(nl, &points));

    out.insert(
        Hypothesis::F1,
        sampler.judge_limit(
            |t| nl.f(t) / t.abs().powf(1.0 + 4.0 / dim as f64),
            Limit::Zero,
            Claim::Vanishes,
            "f(t)/|t|^{1+4/N} -> 0",
        ),
    );

    out.insert(
        Hypothesis::F2,
        match dim {
            1 => vacuous("no growth restriction for N = 1"),
            2 => check_polynomial_growth(nl, &sampler),
            _ => sampler.judge_limit(
                |t| nl.f(t) / t.abs().powf((dim as f64 + 2.0) / (dim as f64 - 2.0)),
                Limit::Infinity,
                Claim::Vanishes,
                "f(t)/|t|^{(N+2)/(N-2)} -> 0",
            ),
        },
    );

    out.insert(
        Hypothesis::F3,
        sampler.judge_limit(
            |t| nl.primitive(t) / t.abs().powf(q),
            Limit::Infinity,
            Claim::Diverges,
            "F(t)/|t|^{2+4/N} -> +inf",
        ),
    );

    out.insert(Hypothesis::F4, check_g_monotone(nl, dim, &points));

    out.insert(
        Hypothesis::F5,
        if dim >= 3 {
            check_sobolev_inequality(nl, crit, &points)
        } else {
            vacuous("only required for N >= 3")
        },
    );

    let critical_quotient = |t: f64| nl.f(t) * t / t.abs().powf(crit);
    if dim >= 3 {
        out.insert(
            Hypothesis::F6,
            sampler.judge_limit(
                critical_quotient,
                Limit::Zero,
                Claim::Diverges,
                "f(t)t/|t|^{2*} -> +inf",
            ),
        );
        out.insert(
            Hypothesis::F6Prime,
            sampler.judge_limit(
                critical_quotient,
                Limit::Zero,
                Claim::Bounded,
                "limsup f(t)t/|t|^{2*} < +inf",
            ),
        );
    } else {
        out.insert(Hypothesis::F6, vacuous("only required for N >= 3"));
        out.insert(Hypothesis::F6Prime, vacuous("only defined for N >= 3"));
    }

    out.insert(Hypothesis::F7, check_h_monotone(nl, q, &points));
    out.insert(Hypothesis::Odd, check_odd(nl, &points));

    ConditionReport {
        nonlinearity: nl.name().to_string(),
        dim,
        sampling,
        hypotheses: out,
    }
}

fn check_continuity(nl: &NonlinearitySpec, points: &[f64]) -> ConditionEntry {
    let method = "finite at every sample and stable under relative perturbation 1e-10".to_string();
    let f0 = nl.f(0.0);
    if !f0.is_finite() {
        return ConditionEntry {
            verdict: Verdict::Fail,
            witnesses: vec![Witness { t: 0.0, value: f0 }],
            method,
        };
    }
    for &t in points {
        for t in [t, -t] {
            let a = nl.f(t);
            let b = nl.f(t * (1.0 + 1e-10));
            let c = nl.f(t * (1.0 - 1e-10));
            let jump = (a - b).abs().max((a - c).abs());
            if !a.is_finite() || !b.is_finite() || jump > 1e-6 * (1.0 + a.abs()) {
                return ConditionEntry {
                    verdict: Verdict::Fail,
                    witnesses: vec![Witness { t, value: a }, Witness { t, value: jump }],
                    method,
                };
            }
        }
    }
    ConditionEntry {
        verdict: Verdict::Pass,
        witnesses: vec![Witness { t: 0.0, value: f0 }],
        method,
    }
}

// N = 2: any polynomial growth is o(e^{γt²}) for every γ > 0. A stable finite
// log-log growth exponent over the top decades certifies that; anything
// faster is left undecided.
fn check_polynomial_growth(nl: &NonlinearitySpec, sampler: &Sampler<'_>) -> ConditionEntry {
    let ts = sampler.tail_window(Limit::Infinity);
    let half = ts.len() / 2;
    let slope_of = |range: &[f64]| {
        let xs: Vec<f64> = range.iter().map(|t| t.ln()).collect();
        let ys: Vec<f64> = range.iter().map(|&t| nl.f(t).abs().ln()).collect();
        regression_slope(&xs, &ys)
    };
    let lower = slope_of(&ts[..=half]);
    let upper = slope_of(&ts[half..]);
    let witnesses = vec![
        Witness { t: ts[half], value: lower },
        Witness { t: *ts.last().unwrap(), value: upper },
    ];
    let finite = lower.is_finite() && upper.is_finite();
    let verdict = if finite && (upper - lower).abs() <= SLOPE_THRESHOLD {
        Verdict::Pass
    } else {
        Verdict::Inconclusive
    };
    ConditionEntry {
        verdict,
        witnesses,
        method: "N = 2: stable polynomial growth exponent of |f| over the top decades \
                 (polynomial growth implies f = o(e^{gamma t^2})); faster growth is inconclusive"
            .into(),
    }
}

fn check_g_monotone(nl: &NonlinearitySpec, dim: usize, points: &[f64]) -> ConditionEntry {
    let method = "scan of g(t) = F~(t)/|t|^{2+4/N}: strictly increasing in |t| on both half-lines"
        .to_string();
    let pos = monotone_violation(points, |t| nl.g(t, dim), true, 0.0);
    let neg = monotone_violation(points, |t| nl.g(-t, dim), true, 0.0);
    if let Some((a, b)) = pos.or(neg.map(|(a, b)| {
        (
            Witness { t: -a.t, value: a.value },
            Witness { t: -b.t, value: b.value },
        )
    })) {
        return ConditionEntry {
            verdict: Verdict::Fail,
            witnesses: vec![a, b],
            method,
        };
    }
    let first = points[0];
    let last = *points.last().unwrap();
    ConditionEntry {
        verdict: Verdict::Pass,
        witnesses: vec![
            Witness { t: first, value: nl.g(first, dim) },
            Witness { t: last, value: nl.g(last, dim) },
        ],
        method,
    }
}

// Relative gap δ(t) = (2*F − ft)/(2*F). A clear negative gap anywhere fails;
// so does a gap at rounding level in the well-conditioned band 1e-3..1e3,
// where a strict inequality would be resolvable.
fn check_sobolev_inequality(nl: &NonlinearitySpec, crit: f64, points: &[f64]) -> ConditionEntry {
    let method = "pointwise scan of f(t)t < 2*F(t): relative gap must be positive \
                  (> 1e-12 on 1e-3 <= |t| <= 1e3, > -1e-10 elsewhere)"
        .to_string();
    let mut smallest = Witness { t: f64::NAN, value: f64::INFINITY };
    for &t in points {
        for t in [t, -t] {
            let rhs = crit * nl.primitive(t);
            let lhs = nl.f(t) * t;
            let gap = (rhs - lhs) / rhs.abs().max(f64::MIN_POSITIVE);
            if gap < smallest.value {
                smallest = Witness { t, value: gap };
            }
            let central = (1e-3..=1e3).contains(&t.abs());
            if gap < -1e-10 || (central && gap <= 1e-12) || !gap.is_finite() {
                return ConditionEntry {
                    verdict: Verdict::Fail,
                    witnesses: vec![
                        Witness { t, value: lhs },
                        Witness { t, value: rhs },
                        Witness { t, value: gap },
                    ],
                    method,
                };
            }
        }
    }
    ConditionEntry {
        verdict: Verdict::Pass,
        witnesses: vec![smallest],
        method,
    }
}

fn check_h_monotone(nl: &NonlinearitySpec, q: f64, points: &[f64]) -> ConditionEntry {
    let method =
        "scan of h(t) = [f(t)t - (2+4/N)F(t)]/t^2: nondecreasing in |t| on both half-lines"
            .to_string();
    let h = |t: f64| (nl.f(t) * t - q * nl.primitive(t)) / (t * t);
    let pos = monotone_violation(points, h, false, 1e-12);
    let neg = monotone_violation(points, |t| h(-t), false, 1e-12);
    match pos.or(neg) {
        Some((a, b)) => ConditionEntry {
            verdict: Verdict::Fail,
            witnesses: vec![a, b],
            method,
        },
        None => ConditionEntry {
            verdict: Verdict::Pass,
            witnesses: vec![Witness { t: points[0], value: h(points[0]) }],
            method,
        },
    }
}

fn check_odd(nl: &NonlinearitySpec, points: &[f64]) -> ConditionEntry {
    let method = "exact comparison f(-t) == -f(t) at every sample".to_string();
    for &t in points {
        let (a, b) = (nl.f(t), nl.f(-t));
        if b != -a {
            return ConditionEntry {
                verdict: Verdict::Fail,
                witnesses: vec![Witness { t, value: a }, Witness { t: -t, value: b }],
                method,
            };
        }
    }
    ConditionEntry {
        verdict: Verdict::Pass,
        witnesses: Vec::new(),
        method,
    }
}
