//! Two-type renewal processes with a shared v-state sequence.
//!
//! Each process alternates between a u-state (holding time drawn from its
//! own U distribution) and a v-state (holding time from V). The two
//! processes use independent U sequences but the *same* realized V
//! sequence; the sharing is what makes the pathwise comparison arguments
//! work, so it is mandatory here. `kappa` is the accumulated u-state time
//! before the horizon and `cycle_count` is the unique n with
//! `S_{2n} <= t < S_{2n+2}`.

use rayon::prelude::*;
use thiserror::Error;

use crate::dist::DistributionSpec;
use crate::report::{run_replications_map, EstimateReport};
use crate::stream::SeededStream;

#[derive(Debug, Error, PartialEq)]
pub enum RenewalError {
    #[error("delta-max statistic requires E[u2] = 1, got {0}")]
    NotMeanOne(f64),
    #[error("bound check requires u1 to be deterministic(1), got {0}")]
    U1NotUnit(String),
}

/// The three holding-time distributions of a coupled pair of two-type
/// renewal processes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenewalSpec {
    pub u1: DistributionSpec,
    pub u2: DistributionSpec,
    pub v: DistributionSpec,
}

impl RenewalSpec {
    /// Hypotheses of the ratio theorem: both U's have finite second
    /// moment and V has infinite mean.
    pub fn ratio_theorem_hypotheses_met(&self) -> bool {
        self.u1.has_finite_second_moment()
            && self.u2.has_finite_second_moment()
            && !self.v.has_finite_mean()
    }
}

/// One realized path up to a horizon.
#[derive(Clone, Debug)]
pub struct RenewalPath {
    /// Renewal instants S_0 = 0 < S_1 < ... including the first instant
    /// beyond the horizon, so the covering block is always recorded.
    pub s_points: Vec<f64>,
    /// Accumulated u-state time at the horizon.
    pub kappa: f64,
    /// Completed-cycle count N_t.
    pub cycle_count: u64,
}

/// Core streaming summary of one path; keeps only what estimators need.
struct PathSummary {
    kappa: f64,
    cycle_count: u64,
}

/// Walk one path to the horizon. `on_u_draw` observes every realized
/// u-state holding time (used to reconstruct window gaps).
fn walk_path(
    u: &DistributionSpec,
    v: &DistributionSpec,
    horizon: f64,
    u_stream: &mut SeededStream,
    v_stream: &mut SeededStream,
    mut on_u_draw: impl FnMut(f64),
) -> PathSummary {
    let mut s = 0.0f64; // S_{2n}
    let mut kappa = 0.0f64;
    let mut n = 0u64;
    loop {
        let u_len = u.sample(u_stream);
        on_u_draw(u_len);
        let u_end = s + u_len; // S_{2n+1}
        kappa += u_end.min(horizon) - s;
        let v_len = v.sample(v_stream);
        let next = u_end + v_len; // S_{2n+2}
        if next > horizon {
            return PathSummary { kappa, cycle_count: n };
        }
        s = next;
        n += 1;
    }
}

/// Simulate the coupled pair, sharing one realized V sequence: the V
/// stream label is identical for both paths, so both replay the same
/// draws.
pub fn simulate_pair(
    spec: &RenewalSpec,
    horizon: f64,
    stream: &SeededStream,
) -> (RenewalPath, RenewalPath) {
    assert!(horizon > 0.0, "horizon must be positive");
    let path = |u: &DistributionSpec, u_label: &str| {
        let mut u_stream = stream.substream(u_label);
        let mut v_stream = stream.substream("v");
        let mut s_points = vec![0.0f64];
        let mut s = 0.0f64;
        let mut kappa = 0.0f64;
        let mut n = 0u64;
        loop {
            let u_end = s + u.sample(&mut u_stream);
            s_points.push(u_end);
            kappa += u_end.min(horizon) - s;
            let next = u_end + spec.v.sample(&mut v_stream);
            s_points.push(next);
            if next > horizon {
                return RenewalPath { s_points, kappa, cycle_count: n };
            }
            s = next;
            n += 1;
        }
    };
    (path(&spec.u1, "u1"), path(&spec.u2, "u2"))
}

impl RenewalPath {
    /// Recompute kappa at `t` from the stored renewal instants, by the
    /// direct u-block overlap sum.
    pub fn kappa_from_u_blocks(&self, t: f64) -> f64 {
        let mut kappa = 0.0;
        let mut i = 0;
        while i + 1 < self.s_points.len() {
            let (a, b) = (self.s_points[i], self.s_points[i + 1]);
            kappa += (b.min(t) - a.min(t)).max(0.0);
            i += 2;
        }
        kappa
    }

    /// Recompute kappa at `t` as t minus the v-block overlap sum (the
    /// complementary expression).
    pub fn kappa_from_v_blocks(&self, t: f64) -> f64 {
        let mut in_v = 0.0;
        let mut i = 1;
        while i + 1 < self.s_points.len() {
            let (a, b) = (self.s_points[i], self.s_points[i + 1]);
            in_v += (b.min(t) - a.min(t)).max(0.0);
            i += 2;
        }
        t - in_v
    }
}

/// Ratio-of-means estimate of E[kappa^(1)_t] / E[kappa^(2)_t] with
/// delta-method standard error.
pub struct KappaRatioEstimate {
    pub report: EstimateReport,
    /// Set when the spec violates the ratio-theorem hypotheses; the
    /// estimate still runs.
    pub warning: Option<String>,
}

pub fn kappa_ratio(
    spec: &RenewalSpec,
    horizon: f64,
    n_reps: u64,
    stream: &SeededStream,
) -> KappaRatioEstimate {
    assert!(horizon > 0.0);
    let pairs: Vec<(f64, f64)> = run_replications_map(stream, n_reps, |s| {
        let mut u1_stream = s.substream("u1");
        let mut u2_stream = s.substream("u2");
        let mut v1_stream = s.substream("v");
        let mut v2_stream = s.substream("v");
        let p1 = walk_path(&spec.u1, &spec.v, horizon, &mut u1_stream, &mut v1_stream, |_| {});
        let p2 = walk_path(&spec.u2, &spec.v, horizon, &mut u2_stream, &mut v2_stream, |_| {});
        (p1.kappa, p2.kappa)
    });
    let numer: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let denom: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let report = EstimateReport::ratio_of_means(&numer, &denom).with_extra("horizon", horizon);
    let warning = if spec.ratio_theorem_hypotheses_met() {
        None
    } else {
        Some(format!(
            "spec {}/{}/{} violates the ratio-theorem hypotheses \
             (need finite second moments for u1, u2 and infinite mean for v)",
            spec.u1, spec.u2, spec.v
        ))
    };
    KappaRatioEstimate { report, warning }
}

/// Maximal gap between the m-th u-block windows of the two processes,
/// computed from the inclusive window endpoints: for windows [a1, b1] and
/// [a2, b2] the maximal |t - t'| is max(b1 - a2, b2 - a1).
pub fn window_gap(a1: f64, b1: f64, a2: f64, b2: f64) -> f64 {
    (b1 - a2).max(b2 - a1)
}

/// Window gaps against the unit process (u1 ≡ 1): the m-th windows are
/// [m, m+1] and [A_m, A_{m+1}] where A_m is the partial sum of u2 draws.
fn gaps_vs_unit(u2_partial_sums: &[f64], k: usize) -> Vec<f64> {
    (0..=k)
        .map(|m| {
            window_gap(
                m as f64,
                (m + 1) as f64,
                u2_partial_sums[m],
                u2_partial_sums[m + 1],
            )
        })
        .collect()
}

/// Monte Carlo estimate of E[max_{0<=m<=k} Delta_m] for u1 ≡ 1.
///
/// Restricted to mean-one u2: the window comparison against the unit
/// process is only meaningful when both u-state means agree.
pub fn delta_max_statistic(
    u2: &DistributionSpec,
    k: usize,
    n_reps: u64,
    stream: &SeededStream,
) -> Result<EstimateReport, RenewalError> {
    let mean = u2.mean();
    if !(mean.is_finite() && (mean - 1.0).abs() < 1e-9) {
        return Err(RenewalError::NotMeanOne(mean));
    }
    let samples: Vec<f64> = run_replications_map(stream, n_reps, |s| {
        let mut u2_stream = s.substream("u2");
        let mut sums = Vec::with_capacity(k + 2);
        sums.push(0.0);
        let mut acc = 0.0;
        for _ in 0..=k {
            acc += u2.sample(&mut u2_stream);
            sums.push(acc);
        }
        gaps_vs_unit(&sums, k).into_iter().fold(f64::MIN, f64::max)
    });
    Ok(EstimateReport::from_samples(&samples).with_extra("k", k as f64))
}

/// E[N_t] / t along a horizon grid; decreasing toward zero whenever
/// E[U + V] is infinite.
pub fn cycle_rate_series(
    spec: &RenewalSpec,
    horizons: &[f64],
    n_reps: u64,
    stream: &SeededStream,
) -> Vec<EstimateReport> {
    horizons
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            assert!(t > 0.0);
            let sub = stream.substream(format!("horizon/{j}"));
            let samples: Vec<f64> = (0..n_reps)
                .into_par_iter()
                .map(|i| {
                    let rep = sub.substream(format!("rep/{i}"));
                    let mut u_stream = rep.substream("u1");
                    let mut v_stream = rep.substream("v");
                    let summary =
                        walk_path(&spec.u1, &spec.v, t, &mut u_stream, &mut v_stream, |_| {});
                    summary.cycle_count as f64 / t
                })
                .collect();
            EstimateReport::from_samples(&samples).with_extra("horizon", t)
        })
        .collect()
}

/// Pathwise check of |kappa^(2)_t - kappa^(1)_t| <= max_{m <= N^(1)_t}
/// Delta_m for u1 ≡ 1. Returns the number of violating replications
/// (must be zero).
pub fn kappa_difference_bound_check(
    spec: &RenewalSpec,
    horizon: f64,
    n_reps: u64,
    stream: &SeededStream,
) -> Result<u64, RenewalError> {
    if !spec.u1.is_deterministic_one() {
        return Err(RenewalError::U1NotUnit(spec.u1.to_string()));
    }
    let violations: Vec<f64> = run_replications_map(stream, n_reps, |s| {
        let mut u1_stream = s.substream("u1");
        let mut u2_stream = s.substream("u2");
        let mut v1_stream = s.substream("v");
        let mut v2_stream = s.substream("v");
        let mut u2_draws: Vec<f64> = Vec::new();
        let p1 = walk_path(&spec.u1, &spec.v, horizon, &mut u1_stream, &mut v1_stream, |_| {});
        let p2 = walk_path(&spec.u2, &spec.v, horizon, &mut u2_stream, &mut v2_stream, |x| {
            u2_draws.push(x)
        });
        // The gap maximum runs over m = 0..=N^(1)_t, which may need more
        // u2 draws than path 2 consumed; the u2 stream continues
        // deterministically.
        let k = p1.cycle_count as usize;
        while u2_draws.len() < k + 2 {
            u2_draws.push(spec.u2.sample(&mut u2_stream));
        }
        let mut sums = Vec::with_capacity(k + 2);
        sums.push(0.0);
        let mut acc = 0.0;
        for draw in u2_draws.iter().take(k + 1) {
            acc += draw;
            sums.push(acc);
        }
        let max_gap = gaps_vs_unit(&sums, k).into_iter().fold(f64::MIN, f64::max);
        let diff = (p2.kappa - p1.kappa).abs();
        if diff <= max_gap + 1e-9 {
            0.0
        } else {
            1.0
        }
    });
    Ok(violations.iter().sum::<f64>() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn det(v: f64) -> DistributionSpec {
        DistributionSpec::deterministic(v).unwrap()
    }

    fn heavy_v() -> DistributionSpec {
        DistributionSpec::pareto(0.5, 1.0).unwrap()
    }

    #[test]
    fn unit_blocks_alternate_exactly() {
        let spec = RenewalSpec { u1: det(1.0), u2: det(1.0), v: det(1.0) };
        let s = SeededStream::new(1, "ren");
        let (p1, _) = simulate_pair(&spec, 10.0, &s);
        assert_eq!(p1.kappa, 5.0);
        assert_eq!(p1.cycle_count, 5); // S_10 = 10 <= t < S_12
        // S_n = n for the first points
        for (n, &sp) in p1.s_points.iter().enumerate().take(10) {
            assert_eq!(sp, n as f64);
        }
    }

    #[test]
    fn horizon_before_first_renewal() {
        let spec = RenewalSpec { u1: det(5.0), u2: det(5.0), v: det(1.0) };
        let s = SeededStream::new(2, "ren");
        let (p1, p2) = simulate_pair(&spec, 3.0, &s);
        assert_eq!(p1.kappa, 3.0, "path starts in the u-state, so kappa_t = t");
        assert_eq!(p2.kappa, 3.0);
        assert_eq!(p1.cycle_count, 0);
    }

    #[test]
    fn shared_v_sequence_is_identical_across_the_pair() {
        let spec = RenewalSpec {
            u1: det(1.0),
            u2: DistributionSpec::exponential(1.0).unwrap(),
            v: heavy_v(),
        };
        let s = SeededStream::new(3, "ren");
        let (p1, p2) = simulate_pair(&spec, 500.0, &s);
        // v-block lengths: S_{2n+2} - S_{2n+1}
        let v1: Vec<f64> = p1.s_points.windows(2).skip(1).step_by(2).map(|w| w[1] - w[0]).collect();
        let v2: Vec<f64> = p2.s_points.windows(2).skip(1).step_by(2).map(|w| w[1] - w[0]).collect();
        let common = v1.len().min(v2.len());
        assert!(common > 3);
        for i in 0..common {
            assert!(
                (v1[i] - v2[i]).abs() < 1e-12,
                "v-sequence diverged at cycle {i}"
            );
        }
    }

    #[test]
    fn kappa_identities_on_simulated_paths() {
        let spec = RenewalSpec {
            u1: DistributionSpec::exponential(0.7).unwrap(),
            u2: det(2.0),
            v: heavy_v(),
        };
        let base = SeededStream::new(4, "ren");
        for i in 0..200 {
            let s = base.substream(format!("case/{i}"));
            let t = 50.0;
            let (p1, p2) = simulate_pair(&spec, t, &s);
            for p in [&p1, &p2] {
                assert!(p.kappa <= t + 1e-12);
                assert!(
                    (p.kappa_from_u_blocks(t) - p.kappa).abs() < 1e-9,
                    "u-block recomputation disagrees"
                );
                assert!(
                    (p.kappa_from_v_blocks(t) - p.kappa).abs() < 1e-9,
                    "complementary recomputation disagrees"
                );
                for w in p.s_points.windows(2) {
                    assert!(w[0] < w[1], "renewal instants must increase");
                }
            }
        }
    }

    #[test]
    fn coupled_draws_give_ratio_exactly_one() {
        // Identical specs and identical stream labels: the two paths are
        // the same realization, so kappa^(1) == kappa^(2) replication by
        // replication.
        let u = DistributionSpec::exponential(1.0).unwrap();
        let base = SeededStream::new(5, "coupled");
        for i in 0..50 {
            let rep = base.substream(format!("rep/{i}"));
            let mut ua = rep.substream("u");
            let mut va = rep.substream("v");
            let mut ub = rep.substream("u");
            let mut vb = rep.substream("v");
            let a = walk_path(&u, &heavy_v(), 1000.0, &mut ua, &mut va, |_| {});
            let b = walk_path(&u, &heavy_v(), 1000.0, &mut ub, &mut vb, |_| {});
            assert_eq!(a.kappa, b.kappa);
        }
    }

    #[test]
    fn delta_max_requires_mean_one() {
        let bad = det(2.0);
        let s = SeededStream::new(6, "dm");
        assert!(matches!(
            delta_max_statistic(&bad, 10, 100, &s),
            Err(RenewalError::NotMeanOne(_))
        ));
    }

    #[test]
    fn delta_gap_unit_u2_is_exactly_one() {
        // With U^(2) ≡ 1 both window systems coincide: every gap is 1.
        let sums: Vec<f64> = (0..=12).map(|m| m as f64).collect();
        for m in 0..=10 {
            let g = window_gap(m as f64, (m + 1) as f64, sums[m], sums[m + 1]);
            assert_eq!(g, 1.0);
        }
        let s = SeededStream::new(7, "dm1");
        let r = delta_max_statistic(&det(1.0), 100, 64, &s).unwrap();
        assert_eq!(r.mean, 1.0);
        assert_eq!(r.std_error, 0.0);
    }

    #[test]
    fn delta_gap_at_zero_matches_bruteforce_definition() {
        // Independent oracle: scan |t - t'| over the two windows on a fine
        // grid; at m = 0 the windows are [0,1] and [0, U], so the gap is
        // max(1, U).
        let brute_force = |b1: f64, b2: f64| -> f64 {
            let n = 2000;
            let mut best = 0.0f64;
            for i in 0..=n {
                let t = b1 * i as f64 / n as f64;
                for j in 0..=n {
                    let tp = b2 * j as f64 / n as f64;
                    best = best.max((t - tp).abs());
                }
            }
            best
        };
        for u in [0.3, 0.9, 1.0, 1.7, 4.2] {
            let exact = window_gap(0.0, 1.0, 0.0, u);
            assert!((exact - 1.0f64.max(u)).abs() < 1e-12);
            assert!(
                (brute_force(1.0, u) - exact).abs() < 1e-2,
                "grid scan disagrees with endpoint formula at u = {u}"
            );
        }
    }

    #[test]
    fn delta_max_growth_is_sublinear_in_k_three_quarters() {
        let u2 = DistributionSpec::exponential(1.0).unwrap();
        let s = SeededStream::new(8, "dmgrow");
        let ks = [100usize, 1000, 10_000];
        let mut normalized = Vec::new();
        for (i, &k) in ks.iter().enumerate() {
            let r = delta_max_statistic(&u2, k, 400, &s.substream(format!("k/{i}"))).unwrap();
            normalized.push(r.mean / (k as f64).powf(0.75));
        }
        for w in normalized.windows(2) {
            assert!(
                w[1] <= w[0] * 1.05,
                "E[max gap]/k^(3/4) should not grow: {normalized:?}"
            );
        }
    }

    #[test]
    fn cycle_rate_limits() {
        let s = SeededStream::new(9, "nt");
        // deterministic unit blocks: N_t / t -> 1/2
        let periodic = RenewalSpec { u1: det(1.0), u2: det(1.0), v: det(1.0) };
        let series = cycle_rate_series(&periodic, &[100.0, 1000.0], 8, &s.substream("det"));
        for r in &series {
            assert!((r.mean - 0.5).abs() < 0.02, "N_t/t = {} for periodic blocks", r.mean);
        }

        // heavy-tailed v: strictly decreasing toward 0, while E[N_t] grows
        let heavy = RenewalSpec { u1: det(1.0), u2: det(1.0), v: heavy_v() };
        let horizons = [100.0, 1000.0, 10_000.0, 100_000.0, 1_000_000.0];
        let series = cycle_rate_series(&heavy, &horizons, 600, &s.substream("heavy"));
        for w in series.windows(2) {
            assert!(
                w[1].mean < w[0].mean,
                "E[N_t]/t must decrease along the grid: {} then {}",
                w[0].mean,
                w[1].mean
            );
        }
        let counts: Vec<f64> = series
            .iter()
            .zip(horizons.iter())
            .map(|(r, t)| r.mean * t)
            .collect();
        for w in counts.windows(2) {
            assert!(w[1] > w[0], "E[N_t] must grow without bound: {counts:?}");
        }
    }

    #[test]
    fn bound_check_rejects_non_unit_u1() {
        let spec = RenewalSpec { u1: det(2.0), u2: det(1.0), v: heavy_v() };
        let s = SeededStream::new(10, "bc");
        assert!(matches!(
            kappa_difference_bound_check(&spec, 10.0, 4, &s),
            Err(RenewalError::U1NotUnit(_))
        ));
    }

    #[test]
    fn bound_check_unit_case_has_no_violations() {
        let spec = RenewalSpec { u1: det(1.0), u2: det(1.0), v: heavy_v() };
        let s = SeededStream::new(11, "bc1");
        assert_eq!(kappa_difference_bound_check(&spec, 100.0, 500, &s).unwrap(), 0);
    }

    #[test]
    fn kappa_ratio_error_shrinks_along_horizon_grid() {
        let spec = RenewalSpec {
            u1: det(2.0),
            u2: det(1.0),
            v: heavy_v(),
        };
        let base = SeededStream::new(13, "grid");
        let mut errors = Vec::new();
        for (i, t) in [1.0e3, 1.0e6].into_iter().enumerate() {
            let est = kappa_ratio(&spec, t, 600, &base.substream(format!("t/{i}")));
            errors.push((est.report.mean - 2.0).abs());
        }
        assert!(
            errors[1] < errors[0],
            "ratio error should shrink with the horizon: {errors:?}"
        );
    }

    #[test]
    fn kappa_ratio_warns_on_finite_mean_v() {
        let spec = RenewalSpec {
            u1: det(1.0),
            u2: det(1.0),
            v: det(1.0),
        };
        let s = SeededStream::new(12, "warn");
        let est = kappa_ratio(&spec, 50.0, 16, &s);
        assert!(est.warning.is_some());
        let ok = RenewalSpec {
            u1: det(1.0),
            u2: DistributionSpec::exponential(1.0).unwrap(),
            v: heavy_v(),
        };
        assert!(kappa_ratio(&ok, 50.0, 16, &s).warning.is_none());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// Path identities hold for arbitrary spec draws and horizons.
        #[test]
        fn kappa_recomputations_agree(seed in 0u64..1000, t in 0.5f64..200.0) {
            let spec = RenewalSpec {
                u1: DistributionSpec::exponential(1.3).unwrap(),
                u2: DistributionSpec::pareto(3.0, 0.5).unwrap(),
                v: DistributionSpec::pareto(0.5, 1.0).unwrap(),
            };
            let s = SeededStream::new(seed, "prop/kappa");
            let (p1, p2) = simulate_pair(&spec, t, &s);
            for p in [&p1, &p2] {
                prop_assert!(p.kappa <= t + 1e-12);
                prop_assert!((p.kappa_from_u_blocks(t) - p.kappa).abs() < 1e-9);
                prop_assert!((p.kappa_from_v_blocks(t) - p.kappa).abs() < 1e-9);
            }
        }

        /// Monotone coupling: deterministic u-blocks with alpha1 > alpha2
        /// and a shared v-sequence give N^(2)_t >= N^(1)_t pathwise, and
        /// |kappa - alpha N| <= alpha.
        #[test]
        fn deterministic_block_coupling(
            seed in 0u64..1000,
            a2 in 0.2f64..2.0,
            extra in 0.05f64..3.0,
            t in 1.0f64..500.0,
        ) {
            let a1 = a2 + extra;
            let spec = RenewalSpec {
                u1: DistributionSpec::deterministic(a1).unwrap(),
                u2: DistributionSpec::deterministic(a2).unwrap(),
                v: DistributionSpec::pareto(0.5, 1.0).unwrap(),
            };
            let s = SeededStream::new(seed, "prop/coupling");
            let (p1, p2) = simulate_pair(&spec, t, &s);
            prop_assert!(p2.cycle_count >= p1.cycle_count);
            prop_assert!((p1.kappa - a1 * p1.cycle_count as f64).abs() <= a1 + 1e-9);
            prop_assert!((p2.kappa - a2 * p2.cycle_count as f64).abs() <= a2 + 1e-9);
        }
    }
}
