//! Structural predicates over the time-varying signal: connectivity notions,
//! persistent-graph extraction, repeated strong connectivity, interval
//! type-symmetry and the per-interval weight-integral bound.

use std::collections::BTreeSet;

use petgraph::algo::{condensation, tarjan_scc};
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EventSequence, NetworkSignal};

/// Directed graph on `n` nodes. An arc `(j, i)` means j influences i; no
/// self-loops are stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedGraph {
    n: usize,
    arcs: BTreeSet<(usize, usize)>,
}

impl DirectedGraph {
    pub fn new(n: usize) -> Self {
        DirectedGraph { n, arcs: BTreeSet::new() }
    }

    pub fn with_arcs(n: usize, arcs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut g = DirectedGraph::new(n);
        for (j, i) in arcs {
            g.add_arc(j, i)?;
        }
        Ok(g)
    }

    pub fn add_arc(&mut self, j: usize, i: usize) -> Result<()> {
        if j >= self.n || i >= self.n {
            return Err(Error::config(format!(
                "arc ({j}, {i}) out of bounds for n={}",
                self.n
            )));
        }
        if j != i {
            self.arcs.insert((j, i));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.arcs.iter().copied()
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn has_arc(&self, j: usize, i: usize) -> bool {
        self.arcs.contains(&(j, i))
    }

    fn as_petgraph(&self) -> DiGraph<usize, ()> {
        let mut g = DiGraph::with_capacity(self.n, self.arcs.len());
        let nodes: Vec<_> = (0..self.n).map(|v| g.add_node(v)).collect();
        for &(j, i) in &self.arcs {
            g.add_edge(nodes[j], nodes[i], ());
        }
        g
    }
}

/// True iff every ordered node pair is walk-connected. A single node is
/// strongly connected (empty walk).
pub fn strongly_connected(g: &DirectedGraph) -> bool {
    if g.n() <= 1 {
        return true;
    }
    tarjan_scc(&g.as_petgraph()).len() == 1
}

/// True (with a witness root) iff some node reaches all others. The root is
/// any node of the unique source component of the condensation.
pub fn quasi_strongly_connected(g: &DirectedGraph) -> (bool, Option<usize>) {
    if g.n() <= 1 {
        return (true, if g.n() == 1 { Some(0) } else { None });
    }
    let condensed = condensation(g.as_petgraph(), true);
    let sources: Vec<_> = condensed
        .node_indices()
        .filter(|&ix| {
            condensed
                .neighbors_directed(ix, petgraph::Direction::Incoming)
                .next()
                .is_none()
        })
        .collect();
    if sources.len() == 1 {
        let root = condensed[sources[0]][0];
        (true, Some(root))
    } else {
        (false, None)
    }
}

/// Exact integral of `a_ij` over `[t_a, t_b]`.
pub fn interval_integral(
    signal: &NetworkSignal,
    i: usize,
    j: usize,
    t_a: f64,
    t_b: f64,
) -> Result<f64> {
    signal.integral_weight(i, j, t_a, t_b)
}

/// Arc set of the interval-union graph after dropping arcs whose weight
/// integral over `[t_a, t_b]` falls below `epsilon`.
pub fn thresholded_graph(
    signal: &NetworkSignal,
    t_a: f64,
    t_b: f64,
    epsilon: f64,
) -> Result<DirectedGraph> {
    let n = signal.n();
    let mut g = DirectedGraph::new(n);
    for i in 0..n {
        for j in 0..n {
            if i != j && signal.integral_weight(i, j, t_a, t_b)? >= epsilon {
                g.add_arc(j, i)?;
            }
        }
    }
    Ok(g)
}

/// Per-interval connectivity verdict of a repeated-connectivity certificate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntervalVerdict {
    pub p: usize,
    pub t_start: f64,
    pub t_end: f64,
    /// Arcs (j, i) surviving the epsilon threshold.
    pub arcs: Vec<(usize, usize)>,
    pub strong: bool,
    pub quasi_strong: bool,
    pub root: Option<usize>,
}

/// Result of checking repeated strong connectivity over an event sequence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConnectivityCertificate {
    pub intervals: Vec<IntervalVerdict>,
    /// All intervals strongly connected.
    pub verdict: bool,
    /// All intervals quasi-strongly connected (the relaxation valid for
    /// equation solutions only).
    pub quasi_verdict: bool,
    pub epsilon: f64,
}

impl ConnectivityCertificate {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Check repeated strong connectivity: threshold each interval's weight
/// integrals at `epsilon` and test the surviving graph.
pub fn repeated_strong_connectivity(
    signal: &NetworkSignal,
    events: &EventSequence,
    epsilon: f64,
) -> Result<ConnectivityCertificate> {
    if epsilon <= 0.0 {
        return Err(Error::config("epsilon must be positive"));
    }
    if events.times().len() < 2 {
        return Err(Error::config(
            "event sequence must contain at least two times (one interval)",
        ));
    }
    let mut intervals = Vec::new();
    for (p, (t_a, t_b)) in events.intervals().enumerate() {
        let g = thresholded_graph(signal, t_a, t_b.min(signal.horizon()), epsilon)?;
        let strong = strongly_connected(&g);
        let (quasi, root) = quasi_strongly_connected(&g);
        intervals.push(IntervalVerdict {
            p,
            t_start: t_a,
            t_end: t_b,
            arcs: g.arcs().collect(),
            strong,
            quasi_strong: quasi,
            root,
        });
    }
    let verdict = intervals.iter().all(|iv| iv.strong);
    let quasi_verdict = intervals.iter().all(|iv| iv.quasi_strong);
    Ok(ConnectivityCertificate { intervals, verdict, quasi_verdict, epsilon })
}

/// Non-instantaneous type-symmetry: on every interval `[t_p, t_{p+1}]` the
/// integrals of `a_ij` and `a_ji` are within a factor K of each other. A
/// zero-vs-zero pair passes vacuously.
pub fn type_symmetry_check(
    signal: &NetworkSignal,
    events: &EventSequence,
    big_k: f64,
) -> Result<bool> {
    if big_k < 1.0 {
        return Err(Error::config("K must be >= 1"));
    }
    let n = signal.n();
    for (t_a, t_b) in events.intervals() {
        let t_b = t_b.min(signal.horizon());
        for i in 0..n {
            for j in (i + 1)..n {
                let fwd = signal.integral_weight(i, j, t_a, t_b)?;
                let bwd = signal.integral_weight(j, i, t_a, t_b)?;
                let tol = 1e-12 * (1.0 + fwd.max(bwd));
                if fwd > big_k * bwd + tol || bwd > big_k * fwd + tol {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Pointwise type-symmetry: the factor-K bound must hold on every segment's
/// matrix, not only in integral form.
pub fn instantaneous_type_symmetry_check(signal: &NetworkSignal, big_k: f64) -> Result<bool> {
    if big_k < 1.0 {
        return Err(Error::config("K must be >= 1"));
    }
    let n = signal.n();
    for seg in signal.segments() {
        for i in 0..n {
            for j in (i + 1)..n {
                let fwd = seg.weights.get(i, j);
                let bwd = seg.weights.get(j, i);
                let tol = 1e-12 * (1.0 + fwd.max(bwd));
                if fwd > big_k * bwd + tol || bwd > big_k * fwd + tol {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Max over intervals and pairs of the interval weight integral.
pub fn m_bound(signal: &NetworkSignal, events: &EventSequence) -> Result<f64> {
    let n = signal.n();
    let mut best = 0.0f64;
    for (t_a, t_b) in events.intervals() {
        let t_b = t_b.min(signal.horizon());
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    best = best.max(signal.integral_weight(i, j, t_a, t_b)?);
                }
            }
        }
    }
    Ok(best)
}

/// Finite-horizon stand-in for the persistent graph: an arc survives iff its
/// weight integral over `[0, horizon]` reaches `divergence_threshold`. A
/// divergent improper integral is undecidable from finite data, so the
/// threshold used is part of the answer.
pub fn persistent_graph(
    signal: &NetworkSignal,
    horizon: f64,
    divergence_threshold: f64,
) -> Result<DirectedGraph> {
    if horizon > signal.horizon() + 1e-12 {
        return Err(Error::out_of_range(format!(
            "requested horizon {horizon} exceeds signal horizon {}",
            signal.horizon()
        )));
    }
    thresholded_graph(signal, 0.0, horizon, divergence_threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{constant_signal, NetworkSignal, Segment, SquareMatrix};

    fn cycle3() -> DirectedGraph {
        DirectedGraph::with_arcs(3, [(0, 1), (1, 2), (2, 0)]).unwrap()
    }

    #[test]
    fn single_node_is_strongly_connected() {
        assert!(strongly_connected(&DirectedGraph::new(1)));
    }

    #[test]
    fn directed_cycle_is_strongly_connected() {
        assert!(strongly_connected(&cycle3()));
    }

    #[test]
    fn one_way_pair_is_not_strongly_connected() {
        let g = DirectedGraph::with_arcs(2, [(0, 1)]).unwrap();
        assert!(!strongly_connected(&g));
        let (quasi, root) = quasi_strongly_connected(&g);
        assert!(quasi);
        assert_eq!(root, Some(0));
    }

    #[test]
    fn outward_star_is_quasi_with_center_root() {
        let g = DirectedGraph::with_arcs(4, [(0, 1), (0, 2), (0, 3)]).unwrap();
        assert!(!strongly_connected(&g));
        assert_eq!(quasi_strongly_connected(&g), (true, Some(0)));
    }

    #[test]
    fn isolated_nodes_are_not_quasi() {
        assert_eq!(quasi_strongly_connected(&DirectedGraph::new(2)), (false, None));
    }

    fn alternating_signal() -> (NetworkSignal, EventSequence) {
        // a_12 active on [0,1), a_21 active on [1,2), repeated once.
        let mut fwd = SquareMatrix::zeros(2);
        fwd.set(1, 0, 1.0); // arc (1 -> 2): weight a_21 in 1-based terms
        let mut bwd = SquareMatrix::zeros(2);
        bwd.set(0, 1, 1.0);
        let seg = |t0: f64, w: &SquareMatrix| Segment {
            t_start: t0,
            t_end: t0 + 1.0,
            weights: w.clone(),
            delays: SquareMatrix::zeros(2),
        };
        let sig = NetworkSignal::new(
            2,
            1.0,
            0.0,
            vec![seg(0.0, &fwd), seg(1.0, &bwd), seg(2.0, &fwd), seg(3.0, &bwd)],
        )
        .unwrap();
        let events = EventSequence::new(vec![0.0, 2.0, 4.0]).unwrap();
        (sig, events)
    }

    #[test]
    fn alternating_passes_interval_but_not_pointwise_symmetry() {
        let (sig, events) = alternating_signal();
        assert!(type_symmetry_check(&sig, &events, 1.0).unwrap());
        assert!(!instantaneous_type_symmetry_check(&sig, 1.0).unwrap());
        assert!(!instantaneous_type_symmetry_check(&sig, 1e6).unwrap());
        // Events splitting a period see one-sided integrals.
        let split = EventSequence::new(vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(!type_symmetry_check(&sig, &split, 1.0).unwrap());
    }

    #[test]
    fn constant_ratio_needs_matching_k() {
        let mut w = SquareMatrix::zeros(2);
        w.set(0, 1, 2.0);
        w.set(1, 0, 1.0);
        let sig = constant_signal(w, 0.0, 2.0, 4.0).unwrap();
        let events = EventSequence::new(vec![0.0, 2.0, 4.0]).unwrap();
        assert!(!type_symmetry_check(&sig, &events, 1.5).unwrap());
        assert!(type_symmetry_check(&sig, &events, 2.0).unwrap());
        assert!(!instantaneous_type_symmetry_check(&sig, 1.9).unwrap());
        assert!(instantaneous_type_symmetry_check(&sig, 2.0).unwrap());
    }

    #[test]
    fn k_below_one_is_rejected() {
        let (sig, events) = alternating_signal();
        assert!(type_symmetry_check(&sig, &events, 0.5).is_err());
        assert!(instantaneous_type_symmetry_check(&sig, 0.5).is_err());
    }

    #[test]
    fn repeated_connectivity_constant_positive_matrix() {
        let mut w = SquareMatrix::zeros(3);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    w.set(i, j, 0.5);
                }
            }
        }
        let sig = constant_signal(w, 0.0, 1.0, 6.0).unwrap();
        let events = EventSequence::new(vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let cert = repeated_strong_connectivity(&sig, &events, 0.5).unwrap();
        assert!(cert.verdict);
        // Threshold above every interval integral empties the graphs.
        let cert = repeated_strong_connectivity(&sig, &events, 10.0).unwrap();
        assert!(!cert.verdict);
        assert!(cert.intervals.iter().all(|iv| iv.arcs.is_empty()));
    }

    #[test]
    fn repeated_connectivity_rejects_bad_inputs() {
        let (sig, _) = alternating_signal();
        let events = EventSequence::new(vec![0.0]).unwrap();
        assert!(repeated_strong_connectivity(&sig, &events, 0.1).is_err());
        let two = EventSequence::new(vec![0.0, 4.0]).unwrap();
        assert!(repeated_strong_connectivity(&sig, &two, -1.0).is_err());
    }

    #[test]
    fn m_bound_rectangle() {
        let mut w = SquareMatrix::zeros(2);
        w.set(0, 1, 1.0);
        let sig = constant_signal(w, 0.0, 1.0, 9.0).unwrap();
        let events = EventSequence::new(vec![0.0, 3.0, 6.0, 9.0]).unwrap();
        assert!((m_bound(&sig, &events).unwrap() - 3.0).abs() < 1e-12);
        // Geometric spacing: the longest interval wins.
        let events = EventSequence::new(vec![0.0, 1.0, 3.0, 7.0]).unwrap();
        assert!((m_bound(&sig, &events).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn persistent_graph_thresholding() {
        let mut w = SquareMatrix::zeros(2);
        w.set(0, 1, 0.5);
        let sig = NetworkSignal::new(
            2,
            1.0,
            0.0,
            vec![
                Segment {
                    t_start: 0.0,
                    t_end: 1.0,
                    weights: w,
                    delays: SquareMatrix::zeros(2),
                },
                Segment {
                    t_start: 1.0,
                    t_end: 10.0,
                    weights: SquareMatrix::zeros(2),
                    delays: SquareMatrix::zeros(2),
                },
            ],
        )
        .unwrap();
        // Integral of a_12 is 0.5: present at threshold 0.4, absent at 1.0.
        let g = persistent_graph(&sig, 10.0, 0.4).unwrap();
        assert!(g.has_arc(1, 0));
        let g = persistent_graph(&sig, 10.0, 1.0).unwrap();
        assert_eq!(g.arc_count(), 0);
    }
}
