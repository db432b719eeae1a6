//! The two-particle exclusion difference walk and its free comparison.
//!
//! `X_s = A_s - B_s` for two particles under exclusion dynamics at rate 1
//! per edge, and `Y_s = A'_s - B'_s` for two independent walks that each
//! jump from every vertex with total rate 2d. Both difference processes
//! jump to each of the 2d neighboring displacements at rate 2 (total 4d)
//! away from the neighbor set of the origin; the rates differ only on
//! that set. Note the rate bookkeeping: each free particle moves at total
//! rate 2d, so their difference moves at total rate 4d — no
//! contradiction, just two conventions for the same pair.
//!
//! `X` can never reach the origin: where `Y` at a neighbor `z` of the
//! origin would jump to 0 at rate 2, `X` instead swaps to `-z` at rate 1
//! (the exchange of the two exclusion particles over their shared edge).

use crate::lattice::{sample_uniform_neighbor, Site};
use crate::report::{run_replications, EstimateReport};
use crate::stream::SeededStream;

/// Which difference-process generator applies.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum WalkKind {
    /// Difference of the exclusion pair; forbidden from the origin.
    ExclusionDifference,
    /// Difference of two free walks; unrestricted.
    FreeDifference,
}

/// Which set local time is accumulated in.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum TrackedSet {
    /// The 2d neighbors of the origin.
    Neighbors,
    /// Neighbors plus the origin itself.
    NeighborsAndOrigin,
}

impl TrackedSet {
    #[inline]
    pub fn contains(&self, x: &Site) -> bool {
        match self {
            TrackedSet::Neighbors => x.l1_norm() == 1,
            TrackedSet::NeighborsAndOrigin => x.l1_norm() <= 1,
        }
    }
}

/// State of one difference trajectory with exact local-time accumulators.
#[derive(Clone, Debug)]
pub struct DifferenceState {
    pub position: Site,
    pub clock: f64,
    pub local_time_neighbors: f64,
    pub local_time_origin: f64,
}

impl DifferenceState {
    pub fn start(position: Site) -> Self {
        DifferenceState {
            position,
            clock: 0.0,
            local_time_neighbors: 0.0,
            local_time_origin: 0.0,
        }
    }
}

/// Total jump rate out of `position`.
#[inline]
pub fn jump_rate(kind: WalkKind, position: &Site) -> f64 {
    let d = position.dim();
    match kind {
        WalkKind::FreeDifference => (4 * d) as f64,
        WalkKind::ExclusionDifference => {
            if position.in_neighbor_set() {
                (4 * d - 1) as f64
            } else {
                (4 * d) as f64
            }
        }
    }
}

/// Sample the landing site of one jump out of `position`.
///
/// Off the neighbor set both kinds jump to each of the 2d displacements
/// with rate 2. On the neighbor set the exclusion difference swaps to the
/// opposite neighbor with rate 1 and takes each remaining displacement
/// with rate 2; the free difference is unchanged there.
#[inline]
pub fn sample_jump(kind: WalkKind, position: &Site, stream: &mut SeededStream) -> Site {
    let d = position.dim();
    let unrestricted = match kind {
        WalkKind::FreeDifference => true,
        WalkKind::ExclusionDifference => !position.in_neighbor_set(),
    };
    if unrestricted {
        return position.step(stream.uniform_index(2 * d));
    }
    // At z in N_0: one categorical draw over total rate 4d-1.
    // v < 1 selects the swap; otherwise one of the 2d-1 non-blocked
    // displacements, each carrying rate 2.
    let blocked = opposite_direction(position);
    let v = stream.u01() * (4 * d - 1) as f64;
    if v < 1.0 {
        return negate(position);
    }
    let idx = ((v - 1.0) / 2.0) as usize; // uniform over 0..2d-1
    let k = (0..2 * d).filter(|&k| k != blocked).nth(idx.min(2 * d - 2)).unwrap();
    position.step(k)
}

#[inline]
fn negate(x: &Site) -> Site {
    let coords: Vec<i64> = x.coords().iter().map(|c| -c).collect();
    Site::new(&coords)
}

/// Direction index whose step from `position` (a neighbor of the origin)
/// lands on the origin.
#[inline]
fn opposite_direction(position: &Site) -> usize {
    debug_assert!(position.in_neighbor_set());
    let axis = position
        .coords()
        .iter()
        .position(|&c| c != 0)
        .expect("neighbor of origin has a nonzero coordinate");
    if position.coords()[axis] > 0 {
        axis * 2 + 1
    } else {
        axis * 2
    }
}

/// Advance one event: draw the holding time at the current position,
/// accumulate local times, then jump. Returns the holding time.
pub fn step(state: &mut DifferenceState, kind: WalkKind, stream: &mut SeededStream) -> f64 {
    if kind == WalkKind::ExclusionDifference {
        assert!(
            !state.position.is_origin(),
            "exclusion difference walk may never occupy the origin"
        );
    }
    let rate = jump_rate(kind, &state.position);
    let hold = stream.exponential(rate);
    if state.position.in_neighbor_set() {
        state.local_time_neighbors += hold;
    } else if state.position.is_origin() {
        state.local_time_origin += hold;
    }
    state.clock += hold;
    state.position = sample_jump(kind, &state.position, stream);
    if kind == WalkKind::ExclusionDifference {
        assert!(
            !state.position.is_origin(),
            "exclusion difference walk jumped onto the origin"
        );
    }
    hold
}

/// Which excursion functional to estimate. The walk starts uniform on the
/// neighbor set; the excursion ends at the first exit from the neighbor
/// set (exclusion) or from neighbors-plus-origin (free).
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ExcursionTarget {
    /// Exit time of the exclusion difference from the neighbor set.
    ExclusionExit,
    /// Exit time of the free difference from neighbors-plus-origin.
    FreeExit,
    /// Time the free difference spends on the neighbor set before exit.
    FreeNeighborTime,
    /// Time the free difference spends at the origin before exit.
    FreeOriginTime,
}

impl ExcursionTarget {
    pub fn walk_kind(&self) -> WalkKind {
        match self {
            ExcursionTarget::ExclusionExit => WalkKind::ExclusionDifference,
            _ => WalkKind::FreeDifference,
        }
    }

    /// Closed-form expected value, for reference and tests.
    pub fn expected_value(&self, d: usize) -> f64 {
        let d = d as f64;
        match self {
            ExcursionTarget::ExclusionExit | ExcursionTarget::FreeNeighborTime => {
                1.0 / (4.0 * d - 2.0)
            }
            ExcursionTarget::FreeExit => (2.0 * d + 1.0) / (8.0 * d * d - 4.0 * d),
            ExcursionTarget::FreeOriginTime => {
                (2.0 * d + 1.0) / (8.0 * d * d - 4.0 * d) - 1.0 / (4.0 * d - 2.0)
            }
        }
    }
}

fn run_excursion(target: ExcursionTarget, d: usize, stream: &mut SeededStream) -> f64 {
    let kind = target.walk_kind();
    let mut state = DifferenceState::start(sample_uniform_neighbor(stream, d));
    loop {
        step(&mut state, kind, stream);
        let exited = match kind {
            WalkKind::ExclusionDifference => !state.position.in_neighbor_set(),
            WalkKind::FreeDifference => state.position.l1_norm() > 1,
        };
        if exited {
            return match target {
                ExcursionTarget::ExclusionExit | ExcursionTarget::FreeExit => state.clock,
                ExcursionTarget::FreeNeighborTime => state.local_time_neighbors,
                ExcursionTarget::FreeOriginTime => state.local_time_origin,
            };
        }
    }
}

/// Monte Carlo mean of one excursion functional.
pub fn excursion_mean(
    target: ExcursionTarget,
    d: usize,
    n_reps: u64,
    stream: &SeededStream,
) -> EstimateReport {
    let samples = run_replications(stream, n_reps, |s| run_excursion(target, d, s));
    EstimateReport::from_samples(&samples).with_extra("d", d as f64)
}

/// One trajectory's tracked-set local time at each horizon (sorted
/// ascending). Event-driven and exact: local time is a sum of holding
/// times at tracked positions, capped at each horizon.
///
/// Away from the origin's immediate vicinity both walks jump to a uniform
/// displacement at total rate 4d, so stretches outside `|x|_1 <= 1`
/// contribute no local time and their holding times matter only through
/// their sum; those stretches are advanced by stepping the embedded jump
/// chain and drawing the elapsed time as one Erlang variate per stretch,
/// which is law-identical to per-event exponentials.
pub fn local_time_path(
    kind: WalkKind,
    tracked: TrackedSet,
    horizons: &[f64],
    d: usize,
    stream: &mut SeededStream,
) -> Vec<f64> {
    debug_assert!(horizons.windows(2).all(|w| w[0] <= w[1]));
    let n_h = horizons.len();
    let mut results = vec![0.0; n_h];
    let mut hidx = 0usize;
    let t_max = *horizons.last().expect("at least one horizon");

    let mut pos = sample_uniform_neighbor(stream, d);
    let mut clock = 0.0f64;
    let mut acc = 0.0f64;
    let outer_rate = (4 * d) as f64;
    let two_d = 2 * d;

    // positions as raw coordinates in the hot loop
    loop {
        if pos.l1_norm() <= 1 {
            let rate = jump_rate(kind, &pos);
            let hold = stream.exponential(rate);
            let in_tracked = tracked.contains(&pos);
            while hidx < n_h && clock + hold >= horizons[hidx] {
                results[hidx] = acc + if in_tracked { horizons[hidx] - clock } else { 0.0 };
                hidx += 1;
                if hidx == n_h {
                    return results;
                }
            }
            if in_tracked {
                acc += hold;
            }
            clock += hold;
            pos = sample_jump(kind, &pos, stream);
        } else {
            // batched stretch strictly outside |x|_1 <= 1
            let remaining = t_max - clock;
            let cap = (remaining * outer_rate * 1.25) as u64 + 32;
            let mut c = [0i64; 3];
            c[..d].copy_from_slice(pos.coords());
            let mut n_steps = 0u64;
            loop {
                let k = stream.uniform_index(two_d);
                c[k / 2] += if k % 2 == 0 { 1 } else { -1 };
                n_steps += 1;
                let l1 = c[..d].iter().map(|x| x.abs()).sum::<i64>();
                if l1 <= 1 || n_steps >= cap {
                    break;
                }
            }
            pos = Site::new(&c[..d]);
            let elapsed = stream.erlang(n_steps, outer_rate);
            while hidx < n_h && clock + elapsed >= horizons[hidx] {
                results[hidx] = acc;
                hidx += 1;
                if hidx == n_h {
                    return results;
                }
            }
            clock += elapsed;
        }
    }
}

/// Estimate the expected local time in `tracked` up to `horizon`.
pub fn local_time_estimate(
    kind: WalkKind,
    tracked: TrackedSet,
    horizon: f64,
    d: usize,
    n_reps: u64,
    stream: &SeededStream,
) -> EstimateReport {
    assert!(horizon >= 0.0);
    if horizon == 0.0 {
        return EstimateReport {
            n_reps,
            mean: 0.0,
            std_error: 0.0,
            extra: std::collections::BTreeMap::new(),
        }
        .with_extra("horizon", 0.0);
    }
    let horizons = [horizon];
    let samples = run_replications(stream, n_reps, |s| {
        local_time_path(kind, tracked, &horizons, d, s)[0]
    });
    EstimateReport::from_samples(&samples)
        .with_extra("horizon", horizon)
        .with_extra("d", d as f64)
}

/// Per-horizon estimates sharing trajectories (each path is read at every
/// horizon, so the series is pathwise monotone).
pub fn local_time_profile(
    kind: WalkKind,
    tracked: TrackedSet,
    horizons: &[f64],
    d: usize,
    n_reps: u64,
    stream: &SeededStream,
) -> Vec<EstimateReport> {
    use crate::report::run_replications_map;
    let paths: Vec<Vec<f64>> =
        run_replications_map(stream, n_reps, |s| local_time_path(kind, tracked, horizons, d, s));
    (0..horizons.len())
        .map(|j| {
            let col: Vec<f64> = paths.iter().map(|p| p[j]).collect();
            EstimateReport::from_samples(&col).with_extra("horizon", horizons[j])
        })
        .collect()
}

/// Literal two-particle exclusion pair (rate 1 per edge, shared-edge
/// rings swap). Retained as a validation oracle for the difference-walk
/// simulators; `positions.1 - positions.0` must have the law of
/// [`WalkKind::ExclusionDifference`].
pub fn dual_pair_trace(
    d: usize,
    horizon: f64,
    stream: &mut SeededStream,
) -> Vec<(f64, Site, Site)> {
    let mut b = Site::origin(d);
    let mut a = b.translate(sample_uniform_neighbor(stream, d));
    let mut t = 0.0f64;
    let mut trace = vec![(0.0, a, b)];
    loop {
        let adjacent = a.is_adjacent_to(&b);
        let rate = if adjacent {
            (4 * d - 1) as f64
        } else {
            (4 * d) as f64
        };
        t += stream.exponential(rate);
        if t > horizon {
            return trace;
        }
        if adjacent {
            // one categorical draw over rate 4d-1: swap (rate 1) or one of
            // the 2(2d-1) unblocked single-particle moves (rate 1 each)
            let v = stream.u01() * (4 * d - 1) as f64;
            if v < 1.0 {
                let set_before = sorted_pair(a, b);
                std::mem::swap(&mut a, &mut b);
                debug_assert_eq!(set_before, sorted_pair(a, b));
            } else {
                let idx = (v - 1.0) as usize;
                let per_particle = 2 * d - 1;
                if idx < per_particle {
                    a = nth_unblocked_move(a, b, idx.min(per_particle - 1));
                } else {
                    b = nth_unblocked_move(b, a, (idx - per_particle).min(per_particle - 1));
                }
            }
        } else {
            let k = stream.uniform_index(4 * d);
            if k < 2 * d {
                a = a.step(k);
            } else {
                b = b.step(k - 2 * d);
            }
        }
        assert_ne!(a, b, "exclusion pair must never collocate");
        trace.push((t, a, b));
    }
}

fn sorted_pair(a: Site, b: Site) -> (Site, Site) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn nth_unblocked_move(from: Site, other: Site, idx: usize) -> Site {
    let d = from.dim();
    let mut seen = 0usize;
    for k in 0..2 * d {
        let target = from.step(k);
        if target == other {
            continue;
        }
        if seen == idx {
            return target;
        }
        seen += 1;
    }
    unreachable!("unblocked move index out of range")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Site;

    fn jump_frequencies(
        kind: WalkKind,
        from: Site,
        n: usize,
        seed: u64,
    ) -> std::collections::HashMap<Site, f64> {
        let mut s = SeededStream::new(seed, "jumps");
        let mut counts: std::collections::HashMap<Site, usize> = Default::default();
        for _ in 0..n {
            *counts.entry(sample_jump(kind, &from, &mut s)).or_default() += 1;
        }
        counts
            .into_iter()
            .map(|(k, v)| (k, v as f64 / n as f64))
            .collect()
    }

    #[test]
    fn exclusion_jump_law_on_neighbor_set_d2() {
        let from = Site::new(&[1, 0]);
        let n = 700_000;
        let freqs = jump_frequencies(WalkKind::ExclusionDifference, from, n, 21);
        let expect = [
            (Site::new(&[-1, 0]), 1.0 / 7.0),
            (Site::new(&[2, 0]), 2.0 / 7.0),
            (Site::new(&[1, 1]), 2.0 / 7.0),
            (Site::new(&[1, -1]), 2.0 / 7.0),
        ];
        assert_eq!(freqs.len(), 4, "unexpected jump targets: {freqs:?}");
        for (site, p) in expect {
            let got = freqs[&site];
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!(
                (got - p).abs() < 4.0 * se,
                "target {site}: frequency {got} vs {p}"
            );
        }
        assert_eq!(jump_rate(WalkKind::ExclusionDifference, &from), 7.0);
    }

    #[test]
    fn free_jump_law_is_uniform_d2() {
        let from = Site::new(&[0, 1]);
        let n = 400_000;
        let freqs = jump_frequencies(WalkKind::FreeDifference, from, n, 22);
        assert_eq!(freqs.len(), 4);
        for (_, p) in freqs {
            assert!((p - 0.25).abs() < 4.0 * (0.25 * 0.75 / n as f64).sqrt());
        }
        assert_eq!(jump_rate(WalkKind::FreeDifference, &from), 8.0);
    }

    #[test]
    fn kinds_agree_off_neighbor_set() {
        let from = Site::new(&[2, 2]);
        assert_eq!(
            jump_rate(WalkKind::ExclusionDifference, &from),
            jump_rate(WalkKind::FreeDifference, &from)
        );
        let n = 400_000;
        let fx = jump_frequencies(WalkKind::ExclusionDifference, from, n, 23);
        let fy = jump_frequencies(WalkKind::FreeDifference, from, n, 24);
        assert_eq!(fx.len(), 4);
        assert_eq!(fy.len(), 4);
        for (site, p) in fx {
            let q = fy[&site];
            let se = (2.0 * 0.25 * 0.75 / n as f64).sqrt();
            assert!((p - q).abs() < 4.0 * se, "target {site}: {p} vs {q}");
        }
    }

    #[test]
    fn excursion_means_match_closed_forms() {
        let base = SeededStream::new(31, "exc-unit");
        let cases = [
            (ExcursionTarget::ExclusionExit, 2, 1.0 / 6.0),
            (ExcursionTarget::FreeExit, 2, 5.0 / 24.0),
            (ExcursionTarget::ExclusionExit, 3, 0.1),
        ];
        for (target, d, want) in cases {
            assert!((target.expected_value(d) - want).abs() < 1e-15);
            let r = excursion_mean(target, d, 200_000, &base.substream(format!("{target:?}/{d}")));
            assert!(
                (r.mean - want).abs() < 3.0 * r.std_error,
                "{target:?} d={d}: {} vs {want} (se {})",
                r.mean,
                r.std_error
            );
        }
    }

    #[test]
    fn free_excursion_splits_into_neighbor_and_origin_time() {
        let base = SeededStream::new(32, "exc-split");
        let d = 2;
        let n = 150_000;
        // Same label for all three: identical trajectories, so the split
        // identity holds sample by sample and in the means.
        let total = excursion_mean(ExcursionTarget::FreeExit, d, n, &base);
        let on_neighbors = excursion_mean(ExcursionTarget::FreeNeighborTime, d, n, &base);
        let at_origin = excursion_mean(ExcursionTarget::FreeOriginTime, d, n, &base);
        assert!(
            (on_neighbors.mean + at_origin.mean - total.mean).abs() < 1e-12,
            "U^Y must equal U^(Y,N0) + U^(Y,0) pathwise"
        );
        let combined_se =
            (on_neighbors.std_error.powi(2) + at_origin.std_error.powi(2)).sqrt() + total.std_error;
        assert!((on_neighbors.mean + at_origin.mean - total.mean).abs() <= 3.0 * combined_se);
    }

    #[test]
    fn exclusion_exit_time_equals_free_neighbor_time_in_mean() {
        // Both functionals share the expectation 1/(4d-2) even though the
        // processes differ; check the estimated means directly against
        // each other.
        let base = SeededStream::new(38, "exc-eq");
        for d in [2usize, 3] {
            let n = 120_000;
            let x = excursion_mean(ExcursionTarget::ExclusionExit, d, n, &base.substream(format!("x/{d}")));
            let yn = excursion_mean(
                ExcursionTarget::FreeNeighborTime,
                d,
                n,
                &base.substream(format!("yn/{d}")),
            );
            let combined = (x.std_error.powi(2) + yn.std_error.powi(2)).sqrt();
            assert!(
                (x.mean - yn.mean).abs() < 3.0 * combined,
                "d={d}: exclusion exit {} vs free neighbor time {} (combined se {combined})",
                x.mean,
                yn.mean
            );
        }
    }

    #[test]
    fn local_time_zero_horizon_is_zero() {
        let base = SeededStream::new(33, "lt0");
        let r = local_time_estimate(
            WalkKind::ExclusionDifference,
            TrackedSet::Neighbors,
            0.0,
            2,
            100,
            &base,
        );
        assert_eq!(r.mean, 0.0);
    }

    #[test]
    fn local_time_profile_is_pathwise_monotone() {
        let mut s = SeededStream::new(34, "ltmono");
        let horizons = [0.5, 1.0, 5.0, 25.0, 100.0];
        for i in 0..200 {
            let mut sub = s.substream(format!("rep/{i}"));
            let path = local_time_path(
                WalkKind::FreeDifference,
                TrackedSet::NeighborsAndOrigin,
                &horizons,
                2,
                &mut sub,
            );
            for w in path.windows(2) {
                assert!(w[0] <= w[1] + 1e-12, "local time decreased: {path:?}");
            }
            assert!(path[4] <= 100.0);
        }
        let _ = s.next_u64();
    }

    /// Batched and purely event-by-event local time must agree in law;
    /// compare means on a horizon where both are cheap.
    #[test]
    fn batched_local_time_agrees_with_naive_stepping() {
        let d = 2;
        let horizon = 50.0;
        let n = 60_000;
        let base = SeededStream::new(35, "ltcmp");
        let batched = local_time_estimate(
            WalkKind::ExclusionDifference,
            TrackedSet::Neighbors,
            horizon,
            d,
            n,
            &base.substream("batched"),
        );

        let naive = |s: &mut SeededStream| {
            let mut st = DifferenceState::start(sample_uniform_neighbor(s, d));
            loop {
                let before = st.clock;
                let in_set = st.position.in_neighbor_set();
                let hold = step(&mut st, WalkKind::ExclusionDifference, s);
                if st.clock >= horizon {
                    let credited = if in_set { horizon - before } else { 0.0 };
                    return st.local_time_neighbors - if in_set { hold } else { 0.0 } + credited;
                }
            }
        };
        let samples = run_replications(&base.substream("naive"), n, naive);
        let naive_rep = EstimateReport::from_samples(&samples);
        let combined = (batched.std_error.powi(2) + naive_rep.std_error.powi(2)).sqrt();
        assert!(
            (batched.mean - naive_rep.mean).abs() < 3.0 * combined,
            "batched {} vs naive {} (combined se {combined})",
            batched.mean,
            naive_rep.mean
        );
    }

    #[test]
    fn pair_trace_never_collocates_and_swap_preserves_set() {
        let mut s = SeededStream::new(36, "pair");
        for i in 0..200 {
            let mut sub = s.substream(format!("rep/{i}"));
            let trace = dual_pair_trace(2, 5.0, &mut sub);
            for (_, a, b) in &trace {
                assert_ne!(a, b);
                assert!(!(a.translate(negate(b))).is_origin());
            }
        }
        let _ = s.next_u64();
    }

    #[test]
    #[should_panic(expected = "never occupy the origin")]
    fn exclusion_step_rejects_origin_state() {
        let mut s = SeededStream::new(37, "origin");
        let mut st = DifferenceState::start(Site::origin(2));
        let _ = step(&mut st, WalkKind::ExclusionDifference, &mut s);
    }
}
