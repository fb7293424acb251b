//! Parametrized signal generators: canonical convergence instances,
//! intermittent and alternating schedules, adversarial negatives and seeded
//! random signals. All generators are deterministic given their parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::model::{EventSequence, NetworkSignal, Segment, SquareMatrix};

fn matrix_max(m: &SquareMatrix) -> f64 {
    let n = m.n();
    let mut best = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            best = best.max(m.get(i, j));
        }
    }
    best
}

fn uniform_delays(weights: &SquareMatrix, delay: f64) -> SquareMatrix {
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
    delays
}

/// Alternate a base matrix with silence. Events sit at active-burst starts so
/// each interval contains exactly one full burst; the last event closes the
/// horizon.
pub fn intermittent(
    base: &SquareMatrix,
    active_durations: &[f64],
    silence_durations: &[f64],
    delay: f64,
) -> Result<(NetworkSignal, EventSequence)> {
    if active_durations.is_empty() {
        return Err(Error::config("need at least one active burst"));
    }
    if active_durations.iter().chain(silence_durations).any(|&d| d <= 0.0) {
        return Err(Error::config("burst and silence durations must be positive"));
    }
    if silence_durations.len() + 1 < active_durations.len() {
        return Err(Error::config(
            "need a silence period between consecutive active bursts",
        ));
    }
    let n = base.n();
    let a_bar = matrix_max(base);
    let delays = uniform_delays(base, delay);
    let zeros = SquareMatrix::zeros(n);

    let mut segments = Vec::new();
    let mut events = Vec::new();
    let mut t = 0.0;
    for (k, &dur) in active_durations.iter().enumerate() {
        events.push(t);
        segments.push(Segment {
            t_start: t,
            t_end: t + dur,
            weights: base.clone(),
            delays: delays.clone(),
        });
        t += dur;
        if let Some(&gap) = silence_durations.get(k) {
            segments.push(Segment {
                t_start: t,
                t_end: t + gap,
                weights: zeros.clone(),
                delays: zeros.clone(),
            });
            t += gap;
        }
    }
    events.push(t);
    let signal = NetworkSignal::new(n, a_bar, delay, segments)?;
    Ok((signal, EventSequence::new(events)?))
}

/// Chain of `n` agents with directional links answered half a period later:
/// forward arcs on the first half-period, backward arcs on the second.
/// Interval type-symmetric with K=1 at period-aligned events while failing
/// the pointwise check for every K. `growth > 1` is rejected: the per-cycle
/// weight integral would grow without bound.
pub fn alternating_reciprocal(
    n: usize,
    weight: f64,
    period: f64,
    delay: f64,
    cycles: usize,
    growth: f64,
) -> Result<(NetworkSignal, EventSequence)> {
    if n < 2 {
        return Err(Error::config("alternating_reciprocal needs n >= 2"));
    }
    if weight <= 0.0 || period <= 0.0 || cycles == 0 {
        return Err(Error::config("weight, period and cycle count must be positive"));
    }
    if growth > 1.0 {
        return Err(Error::config(
            "period growth factor > 1 makes the per-interval weight integral unbounded; \
             use growth <= 1",
        ));
    }
    let mut fwd = SquareMatrix::zeros(n);
    let mut bwd = SquareMatrix::zeros(n);
    for i in 0..n - 1 {
        fwd.set(i + 1, i, weight); // i influences i+1
        bwd.set(i, i + 1, weight); // i+1 influences i
    }
    let fwd_delays = uniform_delays(&fwd, delay);
    let bwd_delays = uniform_delays(&bwd, delay);

    let mut segments = Vec::new();
    let mut events = vec![0.0];
    let mut t = 0.0;
    let mut p = period;
    for _ in 0..cycles {
        let half = p / 2.0;
        segments.push(Segment {
            t_start: t,
            t_end: t + half,
            weights: fwd.clone(),
            delays: fwd_delays.clone(),
        });
        segments.push(Segment {
            t_start: t + half,
            t_end: t + p,
            weights: bwd.clone(),
            delays: bwd_delays.clone(),
        });
        t += p;
        events.push(t);
        p *= growth;
    }
    let signal = NetworkSignal::new(n, weight, delay, segments)?;
    Ok((signal, EventSequence::new(events)?))
}

/// Three agents whose pairwise weights decay geometrically at deliberately
/// distinct per-arc rates: the finite-horizon persistent graph stays
/// complete at a modest threshold while the pairwise interval-integral
/// ratios grow without bound (1.9^k for the most imbalanced pair) and the
/// per-interval integrals all shrink below any fixed epsilon. A best-effort
/// adversarial instance; no divergence claim is attached to it.
pub fn imbalance_divergence(segment_count: usize) -> Result<(NetworkSignal, EventSequence)> {
    let segment_count = segment_count.max(2);
    let rates: [[f64; 3]; 3] = [
        [0.0, 0.50, 0.55],
        [0.95, 0.0, 0.60],
        [0.70, 0.90, 0.0],
    ];
    let mut segments = Vec::new();
    for k in 0..segment_count {
        let mut w = SquareMatrix::zeros(3);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    w.set(i, j, rates[i][j].powi(k as i32));
                }
            }
        }
        segments.push(Segment {
            t_start: k as f64,
            t_end: (k + 1) as f64,
            weights: w,
            delays: SquareMatrix::zeros(3),
        });
    }
    let signal = NetworkSignal::new(3, 1.0, 0.0, segments)?;
    let events = EventSequence::new((0..=segment_count).map(|k| k as f64).collect())?;
    Ok((signal, events))
}

/// Block-diagonal constant signal: complete coupling inside each cluster,
/// nothing across. Negative control for the connectivity hypotheses.
pub fn disconnected_clusters(
    sizes: &[usize],
    intra_weights: &[f64],
    horizon: f64,
) -> Result<NetworkSignal> {
    if sizes.len() < 2 {
        return Err(Error::config("need at least 2 clusters"));
    }
    if intra_weights.len() != sizes.len() {
        return Err(Error::config("one intra-cluster weight per cluster required"));
    }
    if sizes.contains(&0) || intra_weights.iter().any(|&w| w < 0.0) {
        return Err(Error::config("cluster sizes must be positive, weights nonnegative"));
    }
    let n: usize = sizes.iter().sum();
    let mut weights = SquareMatrix::zeros(n);
    let mut offset = 0;
    for (size, &w) in sizes.iter().zip(intra_weights) {
        for i in offset..offset + size {
            for j in offset..offset + size {
                if i != j {
                    weights.set(i, j, w);
                }
            }
        }
        offset += size;
    }
    let a_bar = matrix_max(&weights);
    NetworkSignal::new(
        n,
        a_bar.max(f64::MIN_POSITIVE),
        0.0,
        vec![Segment {
            t_start: 0.0,
            t_end: horizon,
            weights,
            delays: SquareMatrix::zeros(n),
        }],
    )
}

/// Constant directed ring plus reverse arcs with a uniform delay on every
/// arc; strongly connected for any n >= 2.
pub fn delayed_ring(n: usize, weight: f64, delay: f64, horizon: f64) -> Result<NetworkSignal> {
    if n < 2 {
        return Err(Error::config("delayed_ring needs n >= 2"));
    }
    if weight < 0.0 {
        return Err(Error::config("ring weight must be nonnegative"));
    }
    let mut weights = SquareMatrix::zeros(n);
    for i in 0..n {
        let next = (i + 1) % n;
        weights.set(next, i, weight);
        weights.set(i, next, weight);
    }
    let delays = uniform_delays(&weights, delay);
    NetworkSignal::new(
        n,
        weight.max(f64::MIN_POSITIVE),
        delay,
        vec![Segment { t_start: 0.0, t_end: horizon, weights, delays }],
    )
}

/// Directed cycle on `n` nodes with uniform weight (no reverse arcs).
pub fn cycle_matrix(n: usize, weight: f64) -> SquareMatrix {
    let mut m = SquareMatrix::zeros(n);
    for i in 0..n {
        m.set((i + 1) % n, i, weight);
    }
    m
}

/// Seeded random piecewise-constant signal: weights uniform in `[0, a_bar]`
/// (kept with probability `density`), delays uniform in `[0, h_bar]`. When
/// `symmetric` is set the weight matrices are symmetric, hence type-symmetric
/// with K = 1.
#[allow(clippy::too_many_arguments)]
pub fn random_signal(
    seed: u64,
    n: usize,
    segment_count: usize,
    segment_len: f64,
    a_bar: f64,
    h_bar: f64,
    density: f64,
    symmetric: bool,
) -> Result<NetworkSignal> {
    if n < 1 || segment_count == 0 || segment_len <= 0.0 {
        return Err(Error::config("random_signal needs n >= 1 and a nonempty horizon"));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut segments = Vec::with_capacity(segment_count);
    for k in 0..segment_count {
        let mut weights = SquareMatrix::zeros(n);
        let mut delays = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                if i == j || (symmetric && j < i) {
                    continue;
                }
                if rng.gen::<f64>() < density {
                    let w = rng.gen::<f64>() * a_bar;
                    weights.set(i, j, w);
                    if symmetric {
                        weights.set(j, i, w);
                    }
                    if h_bar > 0.0 {
                        let h = rng.gen::<f64>() * h_bar;
                        delays.set(i, j, h);
                        if symmetric {
                            delays.set(j, i, rng.gen::<f64>() * h_bar);
                        }
                    }
                } else if symmetric {
                    weights.set(j, i, 0.0);
                }
            }
        }
        segments.push(Segment {
            t_start: k as f64 * segment_len,
            t_end: (k + 1) as f64 * segment_len,
            weights,
            delays,
        });
    }
    NetworkSignal::new(n, a_bar, h_bar, segments)
}

/// Catalog entry for the CLI.
pub struct ScenarioInfo {
    pub name: &'static str,
    pub params: &'static str,
    pub description: &'static str,
}

pub fn catalog() -> Vec<ScenarioInfo> {
    vec![
        ScenarioInfo {
            name: "delayed_ring",
            params: "n=5, weight=1.0, delay=0.5",
            description: "constant ring plus reverse arcs, uniform delay",
        },
        ScenarioInfo {
            name: "intermittent",
            params: "n=3, weight=1.0, delay=0.0, active=1.0, silence=1.0, silence_growth=2.0, bursts=8, symmetric=false",
            description: "directed cycle alternating with growing silence gaps",
        },
        ScenarioInfo {
            name: "alternating_reciprocal",
            params: "n=2, weight=1.0, period=2.0, delay=0.0, growth=1.0",
            description: "chain whose forward links are answered half a period later",
        },
        ScenarioInfo {
            name: "disconnected_clusters",
            params: "sizes=[2,2], weight=1.0",
            description: "block-diagonal negative control, no cross-cluster arcs",
        },
        ScenarioInfo {
            name: "imbalance_divergence",
            params: "segments=ceil(t_end)",
            description: "3 agents with imbalanced decaying weights, adversarial instance",
        },
        ScenarioInfo {
            name: "random",
            params: "n=3, seed=42, segments=8, segment_len auto, a_bar=1.0, h_bar=0.0, density=0.7, symmetric=false",
            description: "seeded random piecewise-constant signal",
        },
    ]
}

/// Build a scenario by name from loose JSON parameters. The signal covers at
/// least `[0, t_end]`.
pub fn from_name(
    name: &str,
    params: &serde_json::Value,
    t_end: f64,
) -> Result<(NetworkSignal, Option<EventSequence>)> {
    let f = |key: &str, default: f64| -> f64 {
        params.get(key).and_then(|v| v.as_f64()).unwrap_or(default)
    };
    let u = |key: &str, default: u64| -> u64 {
        params.get(key).and_then(|v| v.as_u64()).unwrap_or(default)
    };
    match name {
        "delayed_ring" => {
            let sig = delayed_ring(
                u("n", 5) as usize,
                f("weight", 1.0),
                f("delay", 0.5),
                t_end,
            )?;
            Ok((sig, None))
        }
        "intermittent" => {
            let n = u("n", 3) as usize;
            let mut base = cycle_matrix(n, f("weight", 1.0));
            if params.get("symmetric").and_then(|v| v.as_bool()).unwrap_or(false) {
                for i in 0..n {
                    for j in (i + 1)..n {
                        let w = base.get(i, j).max(base.get(j, i));
                        base.set(i, j, w);
                        base.set(j, i, w);
                    }
                }
            }
            let bursts = u("bursts", 8) as usize;
            let active = vec![f("active", 1.0); bursts];
            let growth = f("silence_growth", 2.0);
            let mut gap = f("silence", 1.0);
            let mut silence = Vec::with_capacity(bursts);
            for _ in 0..bursts {
                silence.push(gap);
                gap *= growth;
            }
            let (mut sig, events) = intermittent(&base, &active, &silence, f("delay", 0.0))?;
            sig = pad_to(sig, t_end)?;
            Ok((sig, Some(events)))
        }
        "alternating_reciprocal" => {
            let period = f("period", 2.0);
            let cycles = (t_end / period).ceil().max(1.0) as usize;
            let (sig, events) = alternating_reciprocal(
                u("n", 2) as usize,
                f("weight", 1.0),
                period,
                f("delay", 0.0),
                cycles,
                f("growth", 1.0),
            )?;
            Ok((sig, Some(events)))
        }
        "disconnected_clusters" => {
            let sizes: Vec<usize> = params
                .get("sizes")
                .and_then(|v| v.as_array())
                .map(|a| a.iter().filter_map(|v| v.as_u64()).map(|v| v as usize).collect())
                .unwrap_or_else(|| vec![2, 2]);
            let w = f("weight", 1.0);
            let sig = disconnected_clusters(&sizes, &vec![w; sizes.len()], t_end)?;
            Ok((sig, None))
        }
        "imbalance_divergence" => {
            let segs = u("segments", t_end.ceil().max(2.0) as u64) as usize;
            let (sig, events) = imbalance_divergence(segs)?;
            Ok((pad_to(sig, t_end)?, Some(events)))
        }
        "random" => {
            let segs = u("segments", 8) as usize;
            let seg_len = f("segment_len", (t_end / segs as f64).max(1e-6));
            let sig = random_signal(
                u("seed", 42),
                u("n", 3) as usize,
                segs,
                seg_len,
                f("a_bar", 1.0),
                f("h_bar", 0.0),
                f("density", 0.7),
                params.get("symmetric").and_then(|v| v.as_bool()).unwrap_or(false),
            )?;
            Ok((pad_to(sig, t_end)?, None))
        }
        other => Err(Error::config(format!(
            "unknown scenario `{other}`; see `lapdde scenarios list`"
        ))),
    }
}

/// Extend a signal with trailing silence so it covers `[0, t_end]`.
pub fn pad_to(signal: NetworkSignal, t_end: f64) -> Result<NetworkSignal> {
    if signal.horizon() >= t_end {
        return Ok(signal);
    }
    let n = signal.n();
    let mut segments = signal.segments().to_vec();
    segments.push(Segment {
        t_start: signal.horizon(),
        t_end,
        weights: SquareMatrix::zeros(n),
        delays: SquareMatrix::zeros(n),
    });
    NetworkSignal::new(n, signal.a_bar(), signal.h_bar(), segments)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph;
    use crate::model::EventSequence;

    #[test]
    fn intermittent_growing_silence_certificate() {
        let base = cycle_matrix(3, 0.8);
        let active = [1.0, 1.0, 1.0, 1.0];
        let silence = [1.0, 2.0, 4.0, 8.0];
        let (sig, events) = intermittent(&base, &active, &silence, 0.0).unwrap();
        // Per-burst integral is 0.8; events at burst starts pass.
        let cert = graph::repeated_strong_connectivity(&sig, &events, 0.8).unwrap();
        assert!(cert.verdict);
        // A uniform grid finer than the longest silence fails.
        let uniform = EventSequence::uniform(2.0, sig.horizon()).unwrap();
        let cert = graph::repeated_strong_connectivity(&sig, &uniform, 0.8).unwrap();
        assert!(!cert.verdict);
    }

    #[test]
    fn intermittent_zero_base_fails_certificate() {
        let base = SquareMatrix::zeros(3);
        let (sig, events) = intermittent(&base, &[1.0, 1.0], &[1.0], 0.0).unwrap();
        let cert = graph::repeated_strong_connectivity(&sig, &events, 0.1).unwrap();
        assert!(!cert.verdict);
        assert!(cert.intervals.iter().all(|iv| iv.arcs.is_empty()));
    }

    #[test]
    fn intermittent_symmetric_base_is_type_symmetric() {
        let mut base = SquareMatrix::zeros(3);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    base.set(i, j, 0.5);
                }
            }
        }
        let (sig, events) = intermittent(&base, &[1.0, 1.0], &[3.0], 0.0).unwrap();
        assert!(graph::type_symmetry_check(&sig, &events, 1.0).unwrap());
    }

    #[test]
    fn intermittent_rejects_negative_durations() {
        let base = cycle_matrix(2, 1.0);
        assert!(intermittent(&base, &[1.0, -1.0], &[1.0], 0.0).is_err());
    }

    #[test]
    fn alternating_passes_interval_symmetry_only() {
        let (sig, events) = alternating_reciprocal(2, 1.0, 2.0, 0.0, 4, 1.0).unwrap();
        assert!(graph::type_symmetry_check(&sig, &events, 1.0).unwrap());
        assert!(!graph::instantaneous_type_symmetry_check(&sig, 1e9).unwrap());
    }

    #[test]
    fn alternating_rejects_growing_periods() {
        let err = alternating_reciprocal(2, 1.0, 2.0, 0.0, 4, 2.0).unwrap_err();
        assert!(err.to_string().contains("unbounded"));
    }

    #[test]
    fn imbalance_instance_predicate_failures() {
        let (sig, events) = imbalance_divergence(64).unwrap();
        // Complete finite-horizon persistent graph at a modest threshold.
        let g = graph::persistent_graph(&sig, sig.horizon(), 1.0).unwrap();
        assert_eq!(g.arc_count(), 6);
        // Interval integral ratios grow without bound: K = 10^6 still fails.
        assert!(!graph::type_symmetry_check(&sig, &events, 1e6).unwrap());
        // Interval integrals shrink, so a fixed epsilon eventually fails.
        let cert = graph::repeated_strong_connectivity(&sig, &events, 0.5).unwrap();
        assert!(!cert.verdict);
    }

    #[test]
    fn clusters_have_no_cross_arcs() {
        let sig = disconnected_clusters(&[2, 2], &[1.0, 1.0], 10.0).unwrap();
        let g = graph::persistent_graph(&sig, 10.0, 0.5).unwrap();
        for (j, i) in g.arcs() {
            assert_eq!(j / 2, i / 2, "cross-block arc ({j},{i})");
        }
        assert!(!graph::strongly_connected(&g));
    }

    #[test]
    fn delayed_ring_is_strongly_connected() {
        let sig = delayed_ring(5, 1.0, 0.5, 50.0).unwrap();
        let events = EventSequence::uniform(5.0, 50.0).unwrap();
        let cert = graph::repeated_strong_connectivity(&sig, &events, 1.0).unwrap();
        assert!(cert.verdict);
    }

    #[test]
    fn zero_weight_ring_keeps_agents_constant() {
        let sig = delayed_ring(3, 0.0, 0.0, 5.0).unwrap();
        let cfg = crate::engine::SimulationConfig::new(0.0, 5.0, 0.05, vec![1.0, 2.0, 3.0]);
        let hist = crate::engine::integrate_equation(&sig, &cfg).unwrap();
        assert_eq!(hist.final_state(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn random_signal_is_deterministic() {
        let a = random_signal(7, 4, 5, 1.0, 1.0, 0.5, 0.7, false).unwrap();
        let b = random_signal(7, 4, 5, 1.0, 1.0, 0.5, 0.7, false).unwrap();
        for (sa, sb) in a.segments().iter().zip(b.segments()) {
            assert_eq!(sa.weights, sb.weights);
            assert_eq!(sa.delays, sb.delays);
        }
        let c = random_signal(8, 4, 5, 1.0, 1.0, 0.5, 0.7, false).unwrap();
        assert!(a.segments()[0].weights != c.segments()[0].weights);
    }

    #[test]
    fn random_symmetric_signal_passes_type_symmetry() {
        let sig = random_signal(3, 4, 6, 1.0, 1.0, 0.0, 0.6, true).unwrap();
        let events = EventSequence::uniform(1.0, sig.horizon()).unwrap();
        assert!(graph::type_symmetry_check(&sig, &events, 1.0).unwrap());
    }
}
