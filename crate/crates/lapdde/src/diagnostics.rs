//! Proof-level observables: trailing-window extrema, ordered component
//! curves, windowed residual integrals and the consensus verdict.

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::history::TrajectoryHistory;
use crate::model::{ResidualSchedule, TIME_TOL};

/// Outcome of a finite-horizon run, with the thresholds that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConsensusVerdict {
    /// Diameter and per-component oscillation stayed below tolerance over
    /// the final window; `c_star` is the final mean.
    ConvergedCommonLimit { c_star: f64 },
    /// The trailing maximum fell below the divergence floor. Components need
    /// not be synchronized in this case.
    DivergedToMinusInfinity,
    NotConvergedAtHorizon,
}

pub const DEFAULT_CONSENSUS_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_DIVERGENCE_FLOOR: f64 = -1e6;
pub const DEFAULT_RESIDUAL_WINDOWS: [f64; 3] = [1.0, 5.0, 10.0];

/// Max/min of all components over the trailing window `[t - h_bar, t]`,
/// evaluated over the sample grid (prehistory sampled at grid offsets, the
/// record itself at its own samples). Returns `(lambda, Lambda)` aligned
/// with the record's sample grid.
pub fn window_extrema(history: &TrajectoryHistory, h_bar: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if h_bar < 0.0 {
        return Err(Error::config("window length h_bar must be nonnegative"));
    }
    if h_bar > history.h_bar() + TIME_TOL {
        return Err(Error::config(format!(
            "window h_bar={h_bar} exceeds the covered prehistory {}",
            history.h_bar()
        )));
    }
    let step = history.step();
    let n = history.n();
    let back = (h_bar / step + TIME_TOL).floor() as usize;

    // Per-sample max/min across agents, prehistory grid first.
    let len = history.len();
    let mut hi = Vec::with_capacity(back + len);
    let mut lo = Vec::with_capacity(back + len);
    for m in (1..=back).rev() {
        let theta = -(m as f64) * step;
        let mut mx = f64::NEG_INFINITY;
        let mut mn = f64::INFINITY;
        for j in 0..n {
            let v = history.prehistory().component(j, theta.max(-history.h_bar()));
            mx = mx.max(v);
            mn = mn.min(v);
        }
        hi.push(mx);
        lo.push(mn);
    }
    for k in 0..len {
        let s = history.sample(k);
        let mx = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mn = s.iter().copied().fold(f64::INFINITY, f64::min);
        hi.push(mx);
        lo.push(mn);
    }

    let big = sliding(&hi, back + 1, true);
    let small = sliding(&lo, back + 1, false);
    Ok((small[back..].to_vec(), big[back..].to_vec()))
}

/// Sliding window max (or min) with a monotone deque; window covers the
/// current index and `width - 1` predecessors.
fn sliding(values: &[f64], width: usize, take_max: bool) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut deque: VecDeque<usize> = VecDeque::new();
    for (k, &v) in values.iter().enumerate() {
        while let Some(&back) = deque.back() {
            let keep = if take_max { values[back] > v } else { values[back] < v };
            if keep {
                break;
            }
            deque.pop_back();
        }
        deque.push_back(k);
        if *deque.front().unwrap() + width <= k {
            deque.pop_front();
        }
        out.push(values[*deque.front().unwrap()]);
    }
    out
}

/// Sorted component curves and the ordering permutations. Ties break by
/// lower agent index first (stable sort), so repeated runs are reproducible.
#[derive(Debug, Clone)]
pub struct OrderedComponents {
    /// `z[k]` is the ascending-sorted state at sample k.
    pub z: Vec<Vec<f64>>,
    /// `sigma[k][r]` is the agent index holding rank r at sample k.
    pub sigma: Vec<Vec<usize>>,
}

pub fn ordered_components(history: &TrajectoryHistory) -> OrderedComponents {
    let n = history.n();
    let mut z = Vec::with_capacity(history.len());
    let mut sigma = Vec::with_capacity(history.len());
    for k in 0..history.len() {
        let state = history.sample(k);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| state[a].total_cmp(&state[b]));
        z.push(order.iter().map(|&i| state[i]).collect());
        sigma.push(order);
    }
    OrderedComponents { z, sigma }
}

/// Sliding-window residual integrals `t -> int_t^{t+T} delta_i`, exact for
/// the piecewise-constant schedule; the schedule is zero past its segments.
pub fn residual_window_integral(
    residuals: &ResidualSchedule,
    n: usize,
    window: f64,
    grid: &[f64],
) -> Result<Vec<Vec<f64>>> {
    if window <= 0.0 {
        return Err(Error::config("residual window T must be positive"));
    }
    let mut curves = vec![Vec::with_capacity(grid.len()); n];
    for &t in grid {
        for (i, curve) in curves.iter_mut().enumerate() {
            curve.push(residuals.integral(i, t, t + window));
        }
    }
    Ok(curves)
}

/// Final-window convergence check. `window` is the trailing span inspected;
/// `floor` is the divergence threshold on the trailing maximum.
pub fn consensus_verdict(
    history: &TrajectoryHistory,
    tolerance: f64,
    window: f64,
    floor: f64,
) -> Result<ConsensusVerdict> {
    if tolerance <= 0.0 {
        return Err(Error::config("consensus tolerance must be positive"));
    }
    let span = history.t_end() - history.t0();
    if window > span + TIME_TOL {
        return Err(Error::config(format!(
            "final window {window} longer than the run span {span}"
        )));
    }
    let n = history.n();
    let back = (window / history.step() + TIME_TOL).floor() as usize;
    let start = history.len().saturating_sub(back + 1);

    let final_max = history
        .final_state()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if final_max < floor {
        return Ok(ConsensusVerdict::DivergedToMinusInfinity);
    }

    let mut diameter = 0.0f64;
    let mut osc_lo = vec![f64::INFINITY; n];
    let mut osc_hi = vec![f64::NEG_INFINITY; n];
    for k in start..history.len() {
        let s = history.sample(k);
        let mx = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mn = s.iter().copied().fold(f64::INFINITY, f64::min);
        diameter = diameter.max(mx - mn);
        for i in 0..n {
            osc_lo[i] = osc_lo[i].min(s[i]);
            osc_hi[i] = osc_hi[i].max(s[i]);
        }
    }
    let oscillation_ok = (0..n).all(|i| osc_hi[i] - osc_lo[i] < tolerance);
    if diameter < tolerance && oscillation_ok {
        let c_star = history.final_state().iter().sum::<f64>() / n as f64;
        Ok(ConsensusVerdict::ConvergedCommonLimit { c_star })
    } else {
        Ok(ConsensusVerdict::NotConvergedAtHorizon)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualWindowCurve {
    pub window: f64,
    /// Per-agent sampled curves.
    pub per_agent: Vec<Vec<f64>>,
    /// Max value of any agent's curve over the tail (last 10% of samples).
    pub tail_max: f64,
}

#[derive(Debug, Clone)]
pub struct DiagnosticsOptions {
    pub tolerance: f64,
    /// Trailing fraction of the run inspected by the verdict.
    pub window_fraction: f64,
    pub divergence_floor: f64,
    pub residual_windows: Vec<f64>,
    /// Keep every `stride`-th sample in exported curves.
    pub stride: usize,
}

impl Default for DiagnosticsOptions {
    fn default() -> Self {
        DiagnosticsOptions {
            tolerance: DEFAULT_CONSENSUS_TOLERANCE,
            window_fraction: 0.1,
            divergence_floor: DEFAULT_DIVERGENCE_FLOOR,
            residual_windows: DEFAULT_RESIDUAL_WINDOWS.to_vec(),
            stride: 1,
        }
    }
}

/// Everything the verifier reports about one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub times: Vec<f64>,
    pub lambda: Vec<f64>,
    #[serde(rename = "Lambda")]
    pub big_lambda: Vec<f64>,
    /// Ascending-sorted component curves, rank-major: `z[r]` is rank r.
    pub z: Vec<Vec<f64>>,
    pub diameter: Vec<f64>,
    pub residual_window_integrals: Vec<ResidualWindowCurve>,
    pub verdict: ConsensusVerdict,
    /// Times (and magnitudes) where the trailing maximum increased beyond
    /// tolerance; should be empty for any feasible run.
    pub monotonicity_violations: Vec<(f64, f64)>,
    pub tolerance: f64,
    pub final_window: f64,
}

impl DiagnosticsReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Plot-ready CSV: `t,lambda,Lambda,z_1..z_n,diameter`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.z.len();
        write!(w, "t,lambda,Lambda")?;
        for r in 1..=n {
            write!(w, ",z_{r}")?;
        }
        writeln!(w, ",diameter")?;
        for k in 0..self.times.len() {
            write!(
                w,
                "{:.16e},{:.16e},{:.16e}",
                self.times[k], self.lambda[k], self.big_lambda[k]
            )?;
            for r in 0..n {
                write!(w, ",{:.16e}", self.z[r][k])?;
            }
            writeln!(w, ",{:.16e}", self.diameter[k])?;
        }
        Ok(())
    }
}

/// Assemble the full report for one run. `monotonicity_tol` should account
/// for the scheme's step-proportional error; the verifier suites pass
/// `1e-9 + 10 * step * a_bar * n`.
pub fn compute_report(
    history: &TrajectoryHistory,
    residuals: &ResidualSchedule,
    monotonicity_tol: f64,
    opts: &DiagnosticsOptions,
) -> Result<DiagnosticsReport> {
    let n = history.n();
    let (lambda, big_lambda) = window_extrema(history, history.h_bar())?;
    let ordered = ordered_components(history);

    let mut violations = Vec::new();
    for k in 1..big_lambda.len() {
        let jump = big_lambda[k] - big_lambda[k - 1];
        if jump > monotonicity_tol {
            violations.push((history.time_of(k), jump));
        }
    }

    let span = history.t_end() - history.t0();
    let final_window = (span * opts.window_fraction).max(history.step());
    let verdict = consensus_verdict(history, opts.tolerance, final_window, opts.divergence_floor)?;

    let stride = opts.stride.max(1);
    let kept: Vec<usize> = (0..history.len()).step_by(stride).collect();
    let times: Vec<f64> = kept.iter().map(|&k| history.time_of(k)).collect();

    let mut residual_curves = Vec::new();
    if !residuals.is_zero() {
        for &window in &opts.residual_windows {
            let per_agent = residual_window_integral(residuals, n, window, &times)?;
            let tail_start = times.len().saturating_sub(times.len() / 10 + 1);
            let tail_max = per_agent
                .iter()
                .flat_map(|c| c[tail_start..].iter().copied())
                .fold(0.0f64, f64::max);
            residual_curves.push(ResidualWindowCurve { window, per_agent, tail_max });
        }
    }

    let z_rank_major: Vec<Vec<f64>> = (0..n)
        .map(|r| kept.iter().map(|&k| ordered.z[k][r]).collect())
        .collect();
    let diameter: Vec<f64> = kept
        .iter()
        .map(|&k| ordered.z[k][n - 1] - ordered.z[k][0])
        .collect();

    Ok(DiagnosticsReport {
        times,
        lambda: kept.iter().map(|&k| lambda[k]).collect(),
        big_lambda: kept.iter().map(|&k| big_lambda[k]).collect(),
        z: z_rank_major,
        diameter,
        residual_window_integrals: residual_curves,
        verdict,
        monotonicity_violations: violations,
        tolerance: opts.tolerance,
        final_window,
    })
}
