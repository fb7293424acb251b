//! Core data model: the time-varying network signal (weights and delays),
//! event sequences, residual schedules and prehistory functions.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for matching segment boundaries and grid times.
pub const TIME_TOL: f64 = 1e-12;

/// Dense n-by-n matrix, row-major. Row `i` holds the influences ON agent `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix { n, data: vec![0.0; n * n] }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::config(format!(
                    "matrix row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(SquareMatrix { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| self.data[i * self.n..(i + 1) * self.n].to_vec())
            .collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for SquareMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        SquareMatrix::from_rows(rows)
    }
}

impl From<SquareMatrix> for Vec<Vec<f64>> {
    fn from(m: SquareMatrix) -> Self {
        m.rows()
    }
}

/// One piecewise-constant segment of the network signal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Segment {
    pub t_start: f64,
    pub t_end: f64,
    /// Weight matrix A; `A[i][j]` is the weight of the influence of j on i.
    #[serde(rename = "A")]
    pub weights: SquareMatrix,
    /// Delay matrix H; `H[i][j]` is the lag of the value of j as seen by i.
    #[serde(rename = "H")]
    pub delays: SquareMatrix,
}

/// The pair (A(t), H(t)) of time-varying weight and delay matrices, given as
/// contiguous piecewise-constant segments covering `[0, horizon)`.
#[derive(Debug, Clone)]
pub struct NetworkSignal {
    n: usize,
    a_bar: f64,
    h_bar: f64,
    segments: Vec<Segment>,
}

impl NetworkSignal {
    pub fn new(n: usize, a_bar: f64, h_bar: f64, segments: Vec<Segment>) -> Result<Self> {
        if n < 1 {
            return Err(Error::config("agent count n must be >= 1"));
        }
        if a_bar < 0.0 || h_bar < 0.0 {
            return Err(Error::config("a_bar and h_bar must be nonnegative"));
        }
        if segments.is_empty() {
            return Err(Error::config("signal needs at least one segment"));
        }
        if segments[0].t_start.abs() > TIME_TOL {
            return Err(Error::config(format!(
                "segments must start at t=0, got {}",
                segments[0].t_start
            )));
        }
        let mut prev_end = segments[0].t_start;
        for (k, seg) in segments.iter().enumerate() {
            if (seg.t_start - prev_end).abs() > TIME_TOL {
                return Err(Error::config(format!(
                    "segment {k} starts at {} but previous ends at {prev_end}",
                    seg.t_start
                )));
            }
            if seg.t_end <= seg.t_start {
                return Err(Error::config(format!("segment {k} has nonpositive length")));
            }
            if seg.weights.n() != n || seg.delays.n() != n {
                return Err(Error::config(format!(
                    "segment {k} matrices are {}x{}, expected {n}x{n}",
                    seg.weights.n(),
                    seg.weights.n()
                )));
            }
            for i in 0..n {
                for j in 0..n {
                    let a = seg.weights.get(i, j);
                    let h = seg.delays.get(i, j);
                    if i == j {
                        if a != 0.0 || h != 0.0 {
                            return Err(Error::config(format!(
                                "segment {k}: diagonal entries must be zero (agent {i})"
                            )));
                        }
                        continue;
                    }
                    if !(0.0..=a_bar + TIME_TOL).contains(&a) {
                        return Err(Error::config(format!(
                            "segment {k}: weight a[{i}][{j}]={a} outside [0, a_bar={a_bar}]"
                        )));
                    }
                    if !(0.0..=h_bar + TIME_TOL).contains(&h) {
                        return Err(Error::config(format!(
                            "segment {k}: delay h[{i}][{j}]={h} outside [0, h_bar={h_bar}]"
                        )));
                    }
                }
            }
            prev_end = seg.t_end;
        }
        Ok(NetworkSignal { n, a_bar, h_bar, segments })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn a_bar(&self) -> f64 {
        self.a_bar
    }

    pub fn h_bar(&self) -> f64 {
        self.h_bar
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn horizon(&self) -> f64 {
        self.segments.last().unwrap().t_end
    }

    /// Index of the segment whose half-open interval `[t_start, t_end)`
    /// contains `t`. Boundaries are matched with absolute tolerance
    /// [`TIME_TOL`] so a time exactly on a boundary belongs to the segment
    /// that starts there; `t == horizon` maps to the last segment.
    pub fn segment_index(&self, t: f64) -> Result<usize> {
        if t < -TIME_TOL || t > self.horizon() + TIME_TOL {
            return Err(Error::out_of_range(format!(
                "time {t} outside signal horizon [0, {}]",
                self.horizon()
            )));
        }
        // Segments are few in practice; binary search on t_start.
        let mut lo = 0usize;
        let mut hi = self.segments.len();
        while lo + 1 < hi {
            let mid = (lo + hi) / 2;
            if self.segments[mid].t_start <= t + TIME_TOL {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // Push across a boundary when t sits within tolerance of seg.t_end.
        if lo + 1 < self.segments.len() && t >= self.segments[lo].t_end - TIME_TOL {
            lo += 1;
        }
        Ok(lo)
    }

    pub fn weights_at(&self, t: f64) -> Result<&SquareMatrix> {
        Ok(&self.segments[self.segment_index(t)?].weights)
    }

    pub fn weight(&self, i: usize, j: usize, t: f64) -> Result<f64> {
        Ok(self.segments[self.segment_index(t)?].weights.get(i, j))
    }

    pub fn delay(&self, i: usize, j: usize, t: f64) -> Result<f64> {
        Ok(self.segments[self.segment_index(t)?].delays.get(i, j))
    }

    /// Weighted in-degree of agent `i` at time `t`: the sum of row `i` of A(t).
    pub fn weighted_degree(&self, i: usize, t: f64) -> Result<f64> {
        let w = self.weights_at(t)?;
        Ok((0..self.n).map(|j| w.get(i, j)).sum())
    }

    /// Exact integral of `a_ij` over `[t_a, t_b]` (sum of width * value over
    /// the covered segment pieces).
    pub fn integral_weight(&self, i: usize, j: usize, t_a: f64, t_b: f64) -> Result<f64> {
        if t_b < t_a - TIME_TOL {
            return Err(Error::config(format!(
                "reversed integration interval [{t_a}, {t_b}]"
            )));
        }
        if t_a < -TIME_TOL || t_b > self.horizon() + TIME_TOL {
            return Err(Error::out_of_range(format!(
                "interval [{t_a}, {t_b}] outside signal horizon [0, {}]",
                self.horizon()
            )));
        }
        let mut total = 0.0;
        for seg in &self.segments {
            let lo = seg.t_start.max(t_a);
            let hi = seg.t_end.min(t_b);
            if hi > lo {
                total += (hi - lo) * seg.weights.get(i, j);
            }
        }
        Ok(total)
    }
}

/// Strictly increasing sequence of event times starting at 0, truncated at
/// the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EventSequence {
    times: Vec<f64>,
}

impl EventSequence {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::config("event sequence must be non-empty"));
        }
        if times[0].abs() > TIME_TOL {
            return Err(Error::config(format!(
                "event sequence must start at 0, got {}",
                times[0]
            )));
        }
        for w in times.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::config(format!(
                    "event times must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        Ok(EventSequence { times })
    }

    /// Uniform grid 0, T, 2T, ... covering `[0, horizon]`.
    pub fn uniform(period: f64, horizon: f64) -> Result<Self> {
        if period <= 0.0 {
            return Err(Error::config("event period must be positive"));
        }
        let ratio = horizon / period;
        // Snap exact multiples so the grid ends on the horizon; otherwise a
        // final full period extends just past it.
        let intervals = if (ratio - ratio.round()).abs() < 1e-9 {
            ratio.round() as usize
        } else {
            ratio.ceil() as usize
        };
        EventSequence::new((0..=intervals.max(1)).map(|k| k as f64 * period).collect())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Consecutive pairs `(t_p, t_{p+1})`.
    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.windows(2).map(|w| (w[0], w[1]))
    }
}

impl TryFrom<Vec<f64>> for EventSequence {
    type Error = Error;
    fn try_from(times: Vec<f64>) -> Result<Self> {
        EventSequence::new(times)
    }
}

impl From<EventSequence> for Vec<f64> {
    fn from(e: EventSequence) -> Self {
        e.times
    }
}

/// One piecewise-constant segment of a residual schedule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualSegment {
    pub t_start: f64,
    pub t_end: f64,
    /// Per-agent slack values, all nonnegative.
    pub delta: Vec<f64>,
}

/// Nonnegative slack functions turning the consensus equations into feasible
/// solutions of the associated differential inequalities. Zero outside the
/// listed segments.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<ResidualSegment>", into = "Vec<ResidualSegment>")]
pub struct ResidualSchedule {
    segments: Vec<ResidualSegment>,
}

impl ResidualSchedule {
    pub fn new(segments: Vec<ResidualSegment>) -> Result<Self> {
        let mut prev_end = f64::NEG_INFINITY;
        for (k, seg) in segments.iter().enumerate() {
            if seg.t_end <= seg.t_start {
                return Err(Error::config(format!(
                    "residual segment {k} has nonpositive length"
                )));
            }
            if seg.t_start < prev_end - TIME_TOL {
                return Err(Error::config(format!("residual segment {k} overlaps the previous one")));
            }
            if seg.delta.iter().any(|&d| d < 0.0) {
                return Err(Error::config(format!(
                    "residual segment {k} has a negative entry; residuals must be >= 0"
                )));
            }
            prev_end = seg.t_end;
        }
        Ok(ResidualSchedule { segments })
    }

    pub fn zero() -> Self {
        ResidualSchedule { segments: Vec::new() }
    }

    pub fn segments(&self) -> &[ResidualSegment] {
        &self.segments
    }

    pub fn is_zero(&self) -> bool {
        self.segments.is_empty()
    }

    /// Slack of agent `i` at time `t` (0 outside all segments).
    pub fn delta(&self, i: usize, t: f64) -> f64 {
        for seg in &self.segments {
            if t >= seg.t_start - TIME_TOL && t < seg.t_end - TIME_TOL {
                return seg.delta.get(i).copied().unwrap_or(0.0);
            }
        }
        0.0
    }

    /// Exact integral of `delta_i` over `[t_a, t_b]`.
    pub fn integral(&self, i: usize, t_a: f64, t_b: f64) -> f64 {
        let mut total = 0.0;
        for seg in &self.segments {
            let lo = seg.t_start.max(t_a);
            let hi = seg.t_end.min(t_b);
            if hi > lo {
                total += (hi - lo) * seg.delta.get(i).copied().unwrap_or(0.0);
            }
        }
        total
    }

    /// Interior times where the schedule switches value; the integrator snaps
    /// these onto its grid.
    pub fn boundary_times(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for seg in &self.segments {
            out.push(seg.t_start);
            out.push(seg.t_end);
        }
        out
    }
}

impl TryFrom<Vec<ResidualSegment>> for ResidualSchedule {
    type Error = Error;
    fn try_from(segments: Vec<ResidualSegment>) -> Result<Self> {
        ResidualSchedule::new(segments)
    }
}

impl From<ResidualSchedule> for Vec<ResidualSegment> {
    fn from(r: ResidualSchedule) -> Self {
        r.segments
    }
}

/// Initial condition on `[-h_bar, 0)`, evaluated exactly (never resampled).
/// May disagree with the initial point at 0: solutions are right-continuous
/// at the start time only.
#[derive(Clone)]
pub enum Prehistory {
    Constant(Vec<f64>),
    Function(Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>),
}

impl Prehistory {
    /// Evaluate at offset `theta` in `[-h_bar, 0]`.
    pub fn eval(&self, theta: f64) -> Vec<f64> {
        match self {
            Prehistory::Constant(v) => v.clone(),
            Prehistory::Function(f) => f(theta),
        }
    }

    pub fn component(&self, j: usize, theta: f64) -> f64 {
        match self {
            Prehistory::Constant(v) => v[j],
            Prehistory::Function(f) => f(theta)[j],
        }
    }
}

impl std::fmt::Debug for Prehistory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Prehistory::Constant(v) => write!(f, "Prehistory::Constant({v:?})"),
            Prehistory::Function(_) => write!(f, "Prehistory::Function(..)"),
        }
    }
}

/// On-disk form of a scenario: signal plus optional event sequence and
/// residual schedule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignalDocument {
    pub n: usize,
    pub a_bar: f64,
    pub h_bar: f64,
    pub segments: Vec<Segment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_times: Option<EventSequence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residuals: Option<ResidualSchedule>,
}

impl SignalDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn signal(&self) -> Result<NetworkSignal> {
        NetworkSignal::new(self.n, self.a_bar, self.h_bar, self.segments.clone())
    }

    pub fn from_signal(
        signal: &NetworkSignal,
        events: Option<&EventSequence>,
        residuals: Option<&ResidualSchedule>,
    ) -> Self {
        SignalDocument {
            n: signal.n(),
            a_bar: signal.a_bar(),
            h_bar: signal.h_bar(),
            segments: signal.segments().to_vec(),
            event_times: events.cloned(),
            residuals: residuals.cloned(),
        }
    }
}

/// Build a constant signal from one weight matrix (and optional uniform delay
/// on its arcs) over `[0, horizon)`.
pub fn constant_signal(
    weights: SquareMatrix,
    delay: f64,
    a_bar: f64,
    horizon: f64,
) -> Result<NetworkSignal> {
    let n = weights.n();
    let mut delays = SquareMatrix::zeros(n);
    if delay > 0.0 {
        for i in 0..n {
            for j in 0..n {
                if i != j && weights.get(i, j) > 0.0 {
                    delays.set(i, j, delay);
                }
            }
        }
    }
    NetworkSignal::new(
        n,
        a_bar,
        delay,
        vec![Segment { t_start: 0.0, t_end: horizon, weights, delays }],
    )
}
