//! Integration of the delayed consensus equations, the associated delay
//! differential inequalities (parametrized by residual schedules), the
//! evolutionary matrix and the superposition (Cauchy) check.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::history::TrajectoryHistory;
use crate::model::{NetworkSignal, Prehistory, ResidualSchedule, SquareMatrix, TIME_TOL};

/// External input term, evaluated pointwise in time.
pub type Forcing = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

#[derive(Clone)]
pub struct SimulationConfig {
    pub t0: f64,
    pub t_end: f64,
    pub step: f64,
    pub initial_point: Vec<f64>,
    pub prehistory: Prehistory,
    pub residuals: Option<ResidualSchedule>,
    pub forcing: Option<Forcing>,
}

impl std::fmt::Debug for SimulationConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SimulationConfig")
            .field("t0", &self.t0)
            .field("t_end", &self.t_end)
            .field("step", &self.step)
            .field("initial_point", &self.initial_point)
            .field("residuals", &self.residuals)
            .field("forcing", &self.forcing.as_ref().map(|_| "<fn>"))
            .finish()
    }
}

impl SimulationConfig {
    pub fn new(t0: f64, t_end: f64, step: f64, initial_point: Vec<f64>) -> Self {
        let hold = initial_point.clone();
        SimulationConfig {
            t0,
            t_end,
            step,
            initial_point,
            prehistory: Prehistory::Constant(hold),
            residuals: None,
            forcing: None,
        }
    }

    pub fn with_prehistory(mut self, prehistory: Prehistory) -> Self {
        self.prehistory = prehistory;
        self
    }

    pub fn with_residuals(mut self, residuals: ResidualSchedule) -> Self {
        self.residuals = Some(residuals);
        self
    }

    pub fn with_forcing(mut self, forcing: Forcing) -> Self {
        self.forcing = Some(forcing);
        self
    }

    pub fn validate(&self, signal: &NetworkSignal) -> Result<()> {
        let n = signal.n();
        if self.initial_point.len() != n {
            return Err(Error::config(format!(
                "initial point has {} components, signal has n={n} agents",
                self.initial_point.len()
            )));
        }
        if self.step <= 0.0 {
            return Err(Error::config("step must be positive"));
        }
        if self.t_end <= self.t0 {
            return Err(Error::config(format!(
                "t_end={} must exceed t0={}",
                self.t_end, self.t0
            )));
        }
        if self.t0 < -TIME_TOL || self.t_end > signal.horizon() + TIME_TOL {
            return Err(Error::config(format!(
                "integration window [{}, {}] exceeds signal horizon [0, {}]",
                self.t0,
                self.t_end,
                signal.horizon()
            )));
        }
        let h_bar = signal.h_bar();
        if h_bar > 0.0 && self.step > h_bar / 4.0 + TIME_TOL {
            return Err(Error::config(format!(
                "step {} violates the delay-resolution bound step <= h_bar/4 = {}",
                self.step,
                h_bar / 4.0
            )));
        }
        if n > 1 && signal.a_bar() > 0.0 {
            let bound = 0.1 / ((n - 1) as f64 * signal.a_bar());
            if self.step > bound + TIME_TOL {
                return Err(Error::config(format!(
                    "step {} violates the stability bound step <= 0.1/((n-1)*a_bar) = {bound}",
                    self.step
                )));
            }
        }
        Ok(())
    }
}

/// Integrate the delayed consensus equations. Rejects configs carrying a
/// residual schedule; use [`integrate_inequality`] for those.
pub fn integrate_equation(
    signal: &NetworkSignal,
    config: &SimulationConfig,
) -> Result<TrajectoryHistory> {
    if config.residuals.is_some() {
        return Err(Error::config(
            "integrate_equation takes no residual schedule; use integrate_inequality",
        ));
    }
    run(signal, config, &ResidualSchedule::zero())
}

/// Integrate a feasible solution of the delay differential inequalities,
/// generated constructively from the config's residual schedule.
pub fn integrate_inequality(
    signal: &NetworkSignal,
    config: &SimulationConfig,
) -> Result<TrajectoryHistory> {
    let residuals = config
        .residuals
        .clone()
        .ok_or_else(|| Error::config("integrate_inequality requires a residual schedule"))?;
    run(signal, config, &residuals)
}

/// One-step Heun (trapezoidal predictor-corrector) update over `[s, s + dt)`
/// with the segment's matrices frozen on the substep. Under the step bound
/// `dt * alpha <= 0.1` every coefficient of the expanded one-step map is
/// nonnegative and each row's coefficients sum to one, so the discrete
/// scheme inherits the monotonicity and substochasticity of the continuous
/// flow while staying second-order accurate.
#[allow(clippy::too_many_arguments)]
fn step_state(
    weights: &SquareMatrix,
    delays: &SquareMatrix,
    state: &[f64],
    dt: f64,
    mut delayed_left: impl FnMut(usize, f64) -> f64,
    s: f64,
    slack: impl Fn(usize) -> f64,
    force: Option<&[f64]>,
) -> Vec<f64> {
    let n = state.len();
    let drift = |x: &[f64], lookup: &mut dyn FnMut(usize, f64) -> f64, at: f64| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let mut acc = 0.0;
                for j in 0..n {
                    let a = weights.get(i, j);
                    if a > 0.0 {
                        acc += a * (lookup(j, at - delays.get(i, j)) - x[i]);
                    }
                }
                acc - slack(i) + force.map_or(0.0, |f| f[i])
            })
            .collect()
    };

    let f1 = drift(state, &mut |j, tau| delayed_left(j, tau), s);
    let predictor: Vec<f64> = (0..n).map(|i| state[i] + dt * f1[i]).collect();

    // Lookups for the right endpoint may land inside the current substep;
    // interpolate against the predictor there.
    let s_next = s + dt;
    let mut right_lookup = |j: usize, tau: f64| -> f64 {
        if tau >= s_next - TIME_TOL {
            predictor[j]
        } else if tau > s + TIME_TOL {
            let frac = (tau - s) / dt;
            state[j] + frac * (predictor[j] - state[j])
        } else {
            delayed_left(j, tau)
        }
    };
    let f2 = drift(&predictor, &mut right_lookup, s_next);

    (0..n).map(|i| state[i] + 0.5 * dt * (f1[i] + f2[i])).collect()
}

fn run(
    signal: &NetworkSignal,
    config: &SimulationConfig,
    residuals: &ResidualSchedule,
) -> Result<TrajectoryHistory> {
    config.validate(signal)?;
    let n = signal.n();
    let t0 = config.t0;
    let raw = (config.t_end - config.t0) / config.step;
    // Truncate to whole steps when t_end is not grid-aligned; the signal
    // horizon is never overrun.
    let steps = if (raw - raw.round()).abs() < 1e-9 { raw.round() } else { raw.floor() }
        .max(1.0) as usize;

    // Refined grid: uniform nodes plus every switching instant of the signal
    // and the residual schedule, so piecewise-constant data is never smeared
    // across a step.
    let mut boundaries: Vec<f64> = signal
        .segments()
        .iter()
        .map(|s| s.t_start)
        .chain(residuals.boundary_times())
        .filter(|&t| t > t0 + TIME_TOL && t < config.t_end - TIME_TOL)
        .collect();
    boundaries.sort_by(f64::total_cmp);

    // times[k] for uniform node k is t0 + k*step computed by multiplication,
    // keeping repeated runs byte-identical.
    let mut times: Vec<f64> = Vec::with_capacity(steps + 1 + boundaries.len());
    let mut uniform_idx: Vec<usize> = Vec::with_capacity(steps + 1);
    let mut b = 0usize;
    for k in 0..=steps {
        let t_k = t0 + k as f64 * config.step;
        while b < boundaries.len() && boundaries[b] < t_k - TIME_TOL {
            if (boundaries[b] - times.last().copied().unwrap_or(f64::NEG_INFINITY)).abs() > TIME_TOL
            {
                times.push(boundaries[b]);
            }
            b += 1;
        }
        while b < boundaries.len() && boundaries[b] <= t_k + TIME_TOL {
            b += 1; // coincides with a uniform node
        }
        uniform_idx.push(times.len());
        times.push(t_k);
    }

    let mut states: Vec<Vec<f64>> = Vec::with_capacity(times.len());
    states.push(config.initial_point.clone());

    let prehistory = &config.prehistory;
    let h_bar = signal.h_bar();
    for k in 0..times.len() - 1 {
        let s = times[k];
        let dt = times[k + 1] - s;
        let seg = &signal.segments()[signal.segment_index(s)?];
        let force = config.forcing.as_ref().map(|f| f(s));
        if let Some(ref f) = force {
            if f.len() != n {
                return Err(Error::config(format!(
                    "forcing returned {} components, expected {n}",
                    f.len()
                )));
            }
        }
        let delayed = |j: usize, tau: f64| -> f64 {
            lookup_refined(&times[..=k], &states, prehistory, t0, h_bar, j, tau)
        };
        let next = step_state(
            &seg.weights,
            &seg.delays,
            &states[k],
            dt,
            delayed,
            s,
            |i| residuals.delta(i, s),
            force.as_deref(),
        );
        states.push(next);
    }

    let samples = uniform_idx.iter().map(|&k| states[k].clone()).collect();
    TrajectoryHistory::new(t0, config.step, h_bar, config.prehistory.clone(), samples)
}

/// Linear interpolation over the refined record built so far; times before
/// `t0` fall through to the prehistory.
fn lookup_refined(
    times: &[f64],
    states: &[Vec<f64>],
    prehistory: &Prehistory,
    t0: f64,
    h_bar: f64,
    j: usize,
    tau: f64,
) -> f64 {
    if tau < t0 - TIME_TOL {
        let theta = (tau - t0).max(-h_bar);
        return prehistory.component(j, theta);
    }
    let last = times.len() - 1;
    if tau >= times[last] - TIME_TOL {
        return states[last][j];
    }
    let hi = times.partition_point(|&t| t <= tau);
    let hi = hi.clamp(1, last);
    let lo = hi - 1;
    let span = times[hi] - times[lo];
    let frac = if span > 0.0 { (tau - times[lo]) / span } else { 0.0 };
    states[lo][j] + frac * (states[hi][j] - states[lo][j])
}

/// Sampled evolutionary matrix U(t, xi) for t on a uniform grid from `xi`.
#[derive(Debug, Clone)]
pub struct EvolutionaryMatrix {
    xi: f64,
    step: f64,
    samples: Vec<SquareMatrix>,
}

impl EvolutionaryMatrix {
    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n(&self) -> usize {
        self.samples[0].n()
    }

    pub fn time_of(&self, k: usize) -> f64 {
        self.xi + k as f64 * self.step
    }

    pub fn sample(&self, k: usize) -> &SquareMatrix {
        &self.samples[k]
    }

    pub fn samples(&self) -> &[SquareMatrix] {
        &self.samples
    }

    /// Matrix at a grid-aligned time `t >= xi`.
    pub fn at_time(&self, t: f64) -> Result<&SquareMatrix> {
        let k = ((t - self.xi) / self.step).round() as isize;
        if k < 0 || k as usize >= self.samples.len() {
            return Err(Error::out_of_range(format!(
                "U(t, xi={}) not sampled at t={t}",
                self.xi
            )));
        }
        if (self.time_of(k as usize) - t).abs() > 1e-9 {
            return Err(Error::config(format!(
                "time {t} is not aligned with the U grid (xi={}, step={})",
                self.xi, self.step
            )));
        }
        Ok(&self.samples[k as usize])
    }

    pub fn row_sums(&self, k: usize) -> Vec<f64> {
        let m = &self.samples[k];
        (0..m.n()).map(|i| (0..m.n()).map(|j| m.get(i, j)).sum()).collect()
    }

    pub fn column_sums(&self, k: usize) -> Vec<f64> {
        let m = &self.samples[k];
        (0..m.n()).map(|j| (0..m.n()).map(|i| m.get(i, j)).sum()).collect()
    }

    /// CSV export: `t,u_11,u_12,...,u_nn` row-major.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        let n = self.n();
        write!(w, "t")?;
        for i in 1..=n {
            for j in 1..=n {
                write!(w, ",u_{i}{j}")?;
            }
        }
        writeln!(w)?;
        for k in 0..self.len() {
            write!(w, "{:.16e}", self.time_of(k))?;
            let m = &self.samples[k];
            for i in 0..n {
                for j in 0..n {
                    write!(w, ",{:.16e}", m.get(i, j))?;
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Compute U(t, xi) for t in `[xi, t_end]` by integrating one coordinate
/// initial point per column with zero prehistory. Columns run in parallel.
pub fn evolutionary_matrix(
    signal: &NetworkSignal,
    xi: f64,
    t_end: f64,
    step: f64,
) -> Result<EvolutionaryMatrix> {
    let n = signal.n();
    let columns: Vec<TrajectoryHistory> = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut a = vec![0.0; n];
            a[k] = 1.0;
            let config = SimulationConfig::new(xi, t_end, step, a)
                .with_prehistory(Prehistory::Constant(vec![0.0; n]));
            integrate_equation(signal, &config)
        })
        .collect::<Result<_>>()?;
    let len = columns[0].len();
    let mut samples = Vec::with_capacity(len);
    for t_idx in 0..len {
        let mut m = SquareMatrix::zeros(n);
        for (col, hist) in columns.iter().enumerate() {
            let state = hist.sample(t_idx);
            for row in 0..n {
                m.set(row, col, state[row]);
            }
        }
        samples.push(m);
    }
    Ok(EvolutionaryMatrix { xi, step, samples })
}

/// Verify the superposition formula: integrate the forced system directly
/// and rebuild it from the unforced solution, the initial-point response and
/// a left-endpoint quadrature of U(t, xi) f(xi). Returns the max deviation
/// over the quadrature grid.
pub fn cauchy_check(
    signal: &NetworkSignal,
    config: &SimulationConfig,
    quad_step: f64,
) -> Result<f64> {
    let forcing = config
        .forcing
        .clone()
        .ok_or_else(|| Error::config("cauchy_check requires a forcing term"))?;
    if config.residuals.is_some() {
        return Err(Error::config("cauchy_check takes no residual schedule"));
    }
    let ratio = quad_step / config.step;
    if (ratio - ratio.round()).abs() > 1e-9 || ratio < 1.0 - 1e-9 {
        return Err(Error::config(format!(
            "quadrature step {quad_step} must be an integer multiple of the integration step {}",
            config.step
        )));
    }
    let span = config.t_end - config.t0;
    let cells = (span / quad_step).round();
    if (span - cells * quad_step).abs() > 1e-9 {
        return Err(Error::config(
            "integration window must be an integer number of quadrature cells",
        ));
    }
    let cells = cells as usize;

    let n = signal.n();
    let full = integrate_equation(signal, config)?;

    let mut hom_cfg = config.clone();
    hom_cfg.initial_point = vec![0.0; n];
    hom_cfg.forcing = None;
    let hom = integrate_equation(signal, &hom_cfg)?;

    // Evaluation times: the quadrature nodes (all grid-aligned).
    let eval_times: Vec<f64> = (0..=cells).map(|q| config.t0 + q as f64 * quad_step).collect();

    // Per-xi contributions U(t, xi) [a or f(xi) * width] accumulated over the
    // evaluation grid; xi runs over left endpoints of quadrature cells.
    let contributions: Vec<Vec<Vec<f64>>> = (0..cells)
        .into_par_iter()
        .map(|m| {
            let xi = config.t0 + m as f64 * quad_step;
            let u = evolutionary_matrix(signal, xi, config.t_end, config.step)?;
            let f_xi = forcing(xi);
            let mut per_time = vec![vec![0.0; n]; eval_times.len()];
            for (q, &t) in eval_times.iter().enumerate() {
                if t <= xi + TIME_TOL {
                    continue;
                }
                let width = (t - xi).min(quad_step);
                let mat = u.at_time(t)?;
                for i in 0..n {
                    let mut acc = 0.0;
                    for j in 0..n {
                        acc += mat.get(i, j) * f_xi[j];
                    }
                    per_time[q][i] = acc * width;
                }
                if m == 0 {
                    // Reuse the xi = t0 run for the initial-point response.
                    for i in 0..n {
                        let mut acc = 0.0;
                        for j in 0..n {
                            acc += mat.get(i, j) * config.initial_point[j];
                        }
                        per_time[q][i] += acc;
                    }
                }
            }
            if m == 0 {
                // U(t0, t0) = I contributes the initial point itself at t = t0.
                for i in 0..n {
                    per_time[0][i] += config.initial_point[i];
                }
            }
            Ok(per_time)
        })
        .collect::<Result<_>>()?;

    let mut deviation = 0.0f64;
    for (q, &t) in eval_times.iter().enumerate() {
        for i in 0..n {
            let rebuilt: f64 = hom.component_at(i, t)?
                + contributions.iter().map(|c| c[q][i]).sum::<f64>();
            let direct = full.component_at(i, t)?;
            deviation = deviation.max((direct - rebuilt).abs());
        }
    }
    Ok(deviation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{constant_signal, ResidualSegment, Segment};

    fn two_agent_signal(w: f64, h: f64, horizon: f64) -> NetworkSignal {
        let mut weights = SquareMatrix::zeros(2);
        weights.set(0, 1, w);
        weights.set(1, 0, w);
        constant_signal(weights, h, w.max(1.0), horizon).unwrap()
    }

    #[test]
    fn single_agent_stays_constant() {
        let sig = constant_signal(SquareMatrix::zeros(1), 0.0, 1.0, 10.0).unwrap();
        let cfg = SimulationConfig::new(0.0, 10.0, 0.1, vec![4.2]);
        let hist = integrate_equation(&sig, &cfg).unwrap();
        for k in 0..hist.len() {
            assert_eq!(hist.sample(k)[0], 4.2);
        }
    }

    #[test]
    fn undelayed_pair_matches_closed_form() {
        let sig = two_agent_signal(1.0, 0.0, 5.0);
        let cfg = SimulationConfig::new(0.0, 5.0, 1e-3, vec![0.0, 2.0]);
        let hist = integrate_equation(&sig, &cfg).unwrap();
        // Eigen-decomposition: mean stays 1, difference decays at rate 2.
        for k in (0..hist.len()).step_by(200) {
            let t = hist.time_of(k);
            let expect0 = 1.0 - (-2.0 * t).exp();
            let expect1 = 1.0 + (-2.0 * t).exp();
            assert!((hist.sample(k)[0] - expect0).abs() < 1e-4, "t={t}");
            assert!((hist.sample(k)[1] - expect1).abs() < 1e-4, "t={t}");
        }
    }

    #[test]
    fn delayed_pair_reaches_consensus_and_matches_fine_reference() {
        let sig = two_agent_signal(1.0, 0.5, 20.0);
        let cfg = SimulationConfig::new(0.0, 20.0, 1e-3, vec![0.0, 2.0]);
        let hist = integrate_equation(&sig, &cfg).unwrap();
        let last = hist.final_state();
        assert!((last[0] - last[1]).abs() < 1e-3);
        assert!(last[0] > 0.0 && last[0] < 2.0);

        let fine = SimulationConfig::new(0.0, 20.0, 1e-5, vec![0.0, 2.0]);
        let reference = integrate_equation(&sig, &fine).unwrap();
        let ref_last = reference.final_state();
        assert!((last[0] - ref_last[0]).abs() < 1e-3);
        assert!((last[1] - ref_last[1]).abs() < 1e-3);
    }

    #[test]
    fn zero_slack_inequality_is_bitwise_equal() {
        let sig = two_agent_signal(1.0, 0.5, 10.0);
        let cfg = SimulationConfig::new(0.0, 10.0, 0.01, vec![0.0, 2.0]);
        let eq = integrate_equation(&sig, &cfg).unwrap();
        let ineq_cfg = cfg.clone().with_residuals(ResidualSchedule::zero());
        let ineq = integrate_inequality(&sig, &ineq_cfg).unwrap();
        for k in 0..eq.len() {
            assert_eq!(eq.sample(k), ineq.sample(k));
        }
    }

    #[test]
    fn unit_slack_single_agent_drifts_linearly() {
        let sig = constant_signal(SquareMatrix::zeros(1), 0.0, 1.0, 10.0).unwrap();
        let sched = ResidualSchedule::new(vec![ResidualSegment {
            t_start: 0.0,
            t_end: 10.0,
            delta: vec![1.0],
        }])
        .unwrap();
        let cfg = SimulationConfig::new(0.0, 10.0, 0.01, vec![0.0]).with_residuals(sched);
        let hist = integrate_inequality(&sig, &cfg).unwrap();
        for k in (0..hist.len()).step_by(100) {
            let t = hist.time_of(k);
            assert!((hist.sample(k)[0] + t).abs() < 1e-9, "y(t) should be -t");
        }
    }

    #[test]
    fn inequality_solution_below_equation_solution() {
        let sig = two_agent_signal(1.0, 0.0, 10.0);
        let cfg = SimulationConfig::new(0.0, 10.0, 0.01, vec![0.0, 2.0]);
        let eq = integrate_equation(&sig, &cfg).unwrap();
        let sched = ResidualSchedule::new(vec![ResidualSegment {
            t_start: 0.0,
            t_end: 5.0,
            delta: vec![0.1, 0.0],
        }])
        .unwrap();
        let ineq = integrate_inequality(&sig, &cfg.clone().with_residuals(sched)).unwrap();
        for k in 0..eq.len() {
            for i in 0..2 {
                assert!(ineq.sample(k)[i] <= eq.sample(k)[i] + 1e-12);
            }
        }
    }

    #[test]
    fn step_bound_violation_is_config_error() {
        let sig = two_agent_signal(1.0, 0.5, 10.0);
        let cfg = SimulationConfig::new(0.0, 10.0, 0.2, vec![0.0, 2.0]);
        let err = integrate_equation(&sig, &cfg).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("h_bar/4"));
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let sig = two_agent_signal(1.0, 0.0, 10.0);
        let cfg = SimulationConfig::new(0.0, 10.0, 0.01, vec![0.0, 2.0, 4.0]);
        assert!(matches!(integrate_equation(&sig, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn segment_switch_is_integrated_exactly() {
        // Weight 1 on [0, 0.55), then 0: diameter contracts by e^{-2*0.55}
        // exactly, independent of grid alignment with the switch.
        let mut w = SquareMatrix::zeros(2);
        w.set(0, 1, 1.0);
        w.set(1, 0, 1.0);
        let sig = NetworkSignal::new(
            2,
            1.0,
            0.0,
            vec![
                Segment {
                    t_start: 0.0,
                    t_end: 0.55,
                    weights: w,
                    delays: SquareMatrix::zeros(2),
                },
                Segment {
                    t_start: 0.55,
                    t_end: 2.0,
                    weights: SquareMatrix::zeros(2),
                    delays: SquareMatrix::zeros(2),
                },
            ],
        )
        .unwrap();
        let cfg = SimulationConfig::new(0.0, 2.0, 0.02, vec![0.0, 2.0]);
        let hist = integrate_equation(&sig, &cfg).unwrap();
        let last = hist.final_state();
        let expect = 2.0 * (-2.0f64 * 0.55).exp();
        assert!(((last[1] - last[0]) - expect).abs() < 1e-3);
    }

    #[test]
    fn evolutionary_matrix_identity_for_zero_weights() {
        let sig = constant_signal(SquareMatrix::zeros(3), 0.0, 1.0, 5.0).unwrap();
        let u = evolutionary_matrix(&sig, 0.0, 5.0, 0.05).unwrap();
        for k in 0..u.len() {
            let m = u.sample(k);
            for i in 0..3 {
                for j in 0..3 {
                    assert_eq!(m.get(i, j), if i == j { 1.0 } else { 0.0 });
                }
            }
        }
    }

    #[test]
    fn evolutionary_matrix_matches_matrix_exponential() {
        let sig = two_agent_signal(1.0, 0.0, 2.0);
        let u = evolutionary_matrix(&sig, 0.0, 2.0, 1e-4).unwrap();
        for k in (0..u.len()).step_by(2000) {
            let t = u.time_of(k);
            let l = nalgebra::DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
            let expm = (-(l * t)).exp();
            let m = u.sample(k);
            for i in 0..2 {
                for j in 0..2 {
                    assert!(
                        (m.get(i, j) - expm[(i, j)]).abs() < 1e-5,
                        "t={t}, entry ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn delayed_ring_row_sums_within_substochastic_bounds() {
        // 3-ring with reverse arcs, delay 0.2.
        let n = 3;
        let mut w = SquareMatrix::zeros(n);
        for i in 0..n {
            w.set(i, (i + 1) % n, 1.0);
            w.set((i + 1) % n, i, 1.0);
        }
        let sig = constant_signal(w, 0.2, 1.0, 5.0).unwrap();
        let psi = (-((n - 1) as f64) * 1.0 * 0.2).exp();
        let u = evolutionary_matrix(&sig, 0.0, 5.0, 0.01).unwrap();
        for k in 0..u.len() {
            for (i, &rs) in u.row_sums(k).iter().enumerate() {
                assert!(rs <= 1.0 + 1e-9, "row {i} sum {rs} at k={k}");
                assert!(rs >= psi - 1e-9, "row {i} sum {rs} below psi={psi}");
            }
            let m = u.sample(k);
            for i in 0..n {
                for j in 0..n {
                    assert!(m.get(i, j) >= -1e-12);
                }
            }
        }
    }

    #[test]
    fn cauchy_without_forcing_reduces_to_linearity() {
        let sig = two_agent_signal(1.0, 0.0, 2.0);
        let cfg = SimulationConfig::new(0.0, 2.0, 1e-3, vec![0.5, -0.5])
            .with_forcing(Arc::new(|_| vec![0.0, 0.0]));
        let dev = cauchy_check(&sig, &cfg, 0.1).unwrap();
        assert!(dev < 1e-9, "deviation {dev}");
    }

    #[test]
    fn cauchy_scalar_unit_forcing_integrates_time() {
        let sig = constant_signal(SquareMatrix::zeros(1), 0.0, 1.0, 3.0).unwrap();
        let cfg = SimulationConfig::new(0.0, 3.0, 1e-2, vec![0.0])
            .with_forcing(Arc::new(|_| vec![1.0]));
        let hist = integrate_equation(&sig, &cfg).unwrap();
        let last = hist.final_state();
        assert!((last[0] - 3.0).abs() < 1e-9);
        let dev = cauchy_check(&sig, &cfg, 0.1).unwrap();
        assert!(dev < 1e-9, "deviation {dev}");
    }

    #[test]
    fn cauchy_rejects_misaligned_grids() {
        let sig = two_agent_signal(1.0, 0.0, 2.0);
        let cfg = SimulationConfig::new(0.0, 2.0, 1e-3, vec![0.0, 1.0])
            .with_forcing(Arc::new(|_| vec![0.0, 0.0]));
        assert!(matches!(cauchy_check(&sig, &cfg, 0.0015), Err(Error::Config(_))));
    }

    #[test]
    fn discrete_linearity_of_the_scheme() {
        let sig = two_agent_signal(0.8, 0.5, 8.0);
        let run = |a: Vec<f64>| {
            let pre = a.clone();
            let cfg = SimulationConfig::new(0.0, 8.0, 0.01, a)
                .with_prehistory(Prehistory::Constant(pre));
            integrate_equation(&sig, &cfg).unwrap()
        };
        let xa = run(vec![1.0, 0.0]);
        let xb = run(vec![0.0, 1.0]);
        let xc = run(vec![2.0, -3.0]);
        for k in (0..xc.len()).step_by(37) {
            for i in 0..2 {
                let combined = 2.0 * xa.sample(k)[i] - 3.0 * xb.sample(k)[i];
                assert!((combined - xc.sample(k)[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn grid_refinement_is_first_order() {
        let sig = two_agent_signal(1.0, 0.5, 10.0);
        let coarse = integrate_equation(&sig, &SimulationConfig::new(0.0, 10.0, 0.02, vec![0.0, 2.0]))
            .unwrap();
        let half = integrate_equation(&sig, &SimulationConfig::new(0.0, 10.0, 0.01, vec![0.0, 2.0]))
            .unwrap();
        let d0 = (coarse.final_state()[0] - half.final_state()[0]).abs();
        assert!(d0 < 0.02, "halving the step should move the terminal state O(dt), got {d0}");
    }
}
