//! The acceptance bundle: every exit criterion as a callable check with
//! its tolerance pinned, shared by the integration test target and the
//! `suite` CLI subcommand.

use crate::contact::{estimate_lambda_c, LambdaCConfig};
use crate::dist::DistributionSpec;
use crate::exclusion::{
    excursion_mean, local_time_estimate, ExcursionTarget, TrackedSet, WalkKind,
};
use crate::genealogy::{
    collision_window, estimate_event_e, estimate_event_i, estimate_event_j, event_e_probability,
    evolve_coupled, evolve_psi, CoupledOptions,
};
use crate::green::{green_constant_d3, green_walk_estimate, pair_adjacency_constant_d3};
use crate::renewal::{kappa_difference_bound_check, kappa_ratio, RenewalSpec};
use crate::report::{run_replications, EstimateReport};
use crate::stream::SeededStream;

/// Outcome of one acceptance criterion.
#[derive(Clone, Debug)]
pub struct CriterionOutcome {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        format!(
            "{} {} — {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

fn outcome(name: &'static str, pass: bool, detail: String) -> CriterionOutcome {
    CriterionOutcome { name, pass, detail }
}

/// Excursion constants: E[exit times] match 1/(4d-2) and
/// (2d+1)/(8d^2-4d) for d = 2 and 3, each within 1% at 1e6 replications.
pub fn criterion_excursion_constants(seed: u64) -> CriterionOutcome {
    let base = SeededStream::new(seed, "accept/excursions");
    let n = 1_000_000;
    let mut pass = true;
    let mut details = Vec::new();
    for d in [2usize, 3] {
        for target in [ExcursionTarget::ExclusionExit, ExcursionTarget::FreeExit] {
            let want = target.expected_value(d);
            let got = excursion_mean(target, d, n, &base.substream(format!("{target:?}/d{d}")));
            let ok = (got.mean - want).abs() <= 0.01 * want;
            pass &= ok;
            details.push(format!(
                "{target:?} d={d}: {:.5} vs {:.5} ({:+.2}%)",
                got.mean,
                want,
                100.0 * (got.mean - want) / want
            ));
        }
    }
    outcome("excursion-constants", pass, details.join("; "))
}

/// d=3 neighborhood local time at t = 1e4: the exclusion and free
/// difference walks agree within 3% and sit within 5% below
/// (G(0,0)-1)/2 (truncation bias is downward; a 3-se allowance covers
/// Monte Carlo noise on the upper side).
pub fn criterion_local_time_d3(seed: u64) -> CriterionOutcome {
    let base = SeededStream::new(seed, "accept/local-d3");
    let constant = pair_adjacency_constant_d3();
    let horizon = 1.0e4;
    let n = 120_000;
    let x = local_time_estimate(
        WalkKind::ExclusionDifference,
        TrackedSet::Neighbors,
        horizon,
        3,
        n,
        &base.substream("exclusion"),
    );
    let y = local_time_estimate(
        WalkKind::FreeDifference,
        TrackedSet::Neighbors,
        horizon,
        3,
        n,
        &base.substream("free"),
    );
    let agree = (x.mean - y.mean).abs() <= 0.03 * constant;
    let x_band = x.mean >= 0.95 * constant && x.mean <= constant + 3.0 * x.std_error;
    let y_band = y.mean >= 0.95 * constant && y.mean <= constant + 3.0 * y.std_error;
    outcome(
        "local-time-d3",
        agree && x_band && y_band,
        format!(
            "exclusion {:.4}, free {:.4}, constant {:.4} (agreement {:.2}%, bands {}/{})",
            x.mean,
            y.mean,
            constant,
            100.0 * (x.mean - y.mean).abs() / constant,
            x_band,
            y_band
        ),
    )
}

/// d=2 ratio at t = 1e5: exclusion time in the neighbor set over free
/// time in neighbors-plus-origin equals 4/5 within 5%.
pub fn criterion_ratio_d2(seed: u64) -> CriterionOutcome {
    let base = SeededStream::new(seed, "accept/ratio-d2");
    let horizon = 1.0e5;
    let n = 30_000;
    let x = local_time_estimate(
        WalkKind::ExclusionDifference,
        TrackedSet::Neighbors,
        horizon,
        2,
        n,
        &base.substream("exclusion"),
    );
    let y = local_time_estimate(
        WalkKind::FreeDifference,
        TrackedSet::NeighborsAndOrigin,
        horizon,
        2,
        n,
        &base.substream("free"),
    );
    let ratio = x.mean / y.mean;
    let pass = (ratio - 0.8).abs() <= 0.05 * 0.8;
    outcome(
        "neighborhood-ratio-d2",
        pass,
        format!(
            "ratio {:.4} vs 0.8 ({:+.2}%), numerator {:.3}, denominator {:.3}",
            ratio,
            100.0 * (ratio - 0.8) / 0.8,
            x.mean,
            y.mean
        ),
    )
}

/// d=2 growth rate: least-squares slope of E[free time in the neighbor
/// set] against log t over t in {1e3, 1e4, 1e5, 1e6} within 15% of
/// 1/(2 pi).
pub fn criterion_log_slope_d2(seed: u64) -> CriterionOutcome {
    let base = SeededStream::new(seed, "accept/log-slope");
    let horizons = [1.0e3, 1.0e4, 1.0e5, 1.0e6];
    // per-level replication counts shrink with cost; the slope pools them
    let reps = [60_000u64, 20_000, 6_000, 2_000];
    let mut levels = Vec::new();
    for (j, (&t, &n)) in horizons.iter().zip(reps.iter()).enumerate() {
        let est = local_time_estimate(
            WalkKind::FreeDifference,
            TrackedSet::Neighbors,
            t,
            2,
            n,
            &base.substream(format!("level/{j}")),
        );
        levels.push((t.ln(), est.mean));
    }
    let xbar = levels.iter().map(|p| p.0).sum::<f64>() / levels.len() as f64;
    let ybar = levels.iter().map(|p| p.1).sum::<f64>() / levels.len() as f64;
    let sxy: f64 = levels.iter().map(|p| (p.0 - xbar) * (p.1 - ybar)).sum();
    let sxx: f64 = levels.iter().map(|p| (p.0 - xbar).powi(2)).sum();
    let slope = sxy / sxx;
    let want = 1.0 / (2.0 * std::f64::consts::PI);
    let pass = (slope - want).abs() <= 0.15 * want;
    outcome(
        "log-slope-d2",
        pass,
        format!(
            "slope {:.4} vs 1/(2pi) = {:.4} ({:+.1}%); levels {:?}",
            slope,
            want,
            100.0 * (slope - want) / want,
            levels.iter().map(|p| (p.1 * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        ),
    )
}

/// Renewal ratio theorem: (det 1, exp 1, pareto 1/2) tends to 1 and
/// (det 2, det 1, pareto 1/2) tends to 2, both within 5% at t = 1e6.
pub fn criterion_renewal_ratios(seed: u64) -> CriterionOutcome {
    let base = SeededStream::new(seed, "accept/renewal-ratio");
    let horizon = 1.0e6;
    let n = 4_000;
    let heavy = DistributionSpec::pareto(0.5, 1.0).unwrap();
    let case1 = RenewalSpec {
        u1: DistributionSpec::deterministic(1.0).unwrap(),
        u2: DistributionSpec::exponential(1.0).unwrap(),
        v: heavy,
    };
    let case2 = RenewalSpec {
        u1: DistributionSpec::deterministic(2.0).unwrap(),
        u2: DistributionSpec::deterministic(1.0).unwrap(),
        v: heavy,
    };
    let r1 = kappa_ratio(&case1, horizon, n, &base.substream("unit-vs-exp"));
    let r2 = kappa_ratio(&case2, horizon, n, &base.substream("two-vs-one"));
    let ok1 = (r1.report.mean - 1.0).abs() <= 0.05;
    let ok2 = (r2.report.mean - 2.0).abs() <= 0.05 * 2.0;
    outcome(
        "renewal-ratios",
        ok1 && ok2 && r1.warning.is_none() && r2.warning.is_none(),
        format!(
            "det1/exp1 ratio {:.4} (target 1), det2/det1 ratio {:.4} (target 2)",
            r1.report.mean, r2.report.mean
        ),
    )
}

/// Pathwise gap bound: zero violations of
/// |kappa2 - kappa1| <= max window gap over 1e4 paths.
pub fn criterion_gap_bound(seed: u64) -> CriterionOutcome {
    let base = SeededStream::new(seed, "accept/gap-bound");
    let spec = RenewalSpec {
        u1: DistributionSpec::deterministic(1.0).unwrap(),
        u2: DistributionSpec::exponential(1.0).unwrap(),
        v: DistributionSpec::pareto(0.5, 1.0).unwrap(),
    };
    let violations = kappa_difference_bound_check(&spec, 1.0e3, 10_000, &base).unwrap();
    outcome(
        "kappa-gap-bound",
        violations == 0,
        format!("{violations} violations over 10000 paths at t=1e3"),
    )
}

/// Branching mean: E[present at t] = exp((lambda-1) t) within 2% for
/// (1.2, 5) and (0.8, 5). The replication count is 4e5 so the 2% band
/// sits past 3 standard errors; at the 1e5 floor it would be only ~1.6
/// se for the subcritical case and any seed would fail a fifth of the
/// time.
pub fn criterion_branching_mean(seed: u64) -> CriterionOutcome {
    let base = SeededStream::new(seed, "accept/branching-mean");
    let mut pass = true;
    let mut details = Vec::new();
    for (i, lambda) in [1.2f64, 0.8].into_iter().enumerate() {
        let t = 5.0;
        let want = ((lambda - 1.0) * t).exp();
        let samples = run_replications(&base.substream(format!("case/{i}")), 400_000, |s| {
            let run = evolve_psi(lambda, &[t], 1_000_000, s);
            assert!(!run.truncated);
            run.counts[0] as f64
        });
        let est = EstimateReport::from_samples(&samples);
        let ok = (est.mean - want).abs() <= 0.02 * want;
        pass &= ok;
        details.push(format!(
            "lambda={lambda}: {:.4} vs {:.4} ({:+.2}%)",
            est.mean,
            want,
            100.0 * (est.mean - want) / want
        ));
    }
    outcome("branching-mean", pass, details.join("; "))
}

/// Coupling invariants: zero violations over 1e3 coupled trajectories at
/// (1.5, 10) and (1.2, 100), horizon 5.
pub fn criterion_coupling_invariants(seed: u64) -> CriterionOutcome {
    let base = SeededStream::new(seed, "accept/coupling");
    let mut violations = 0u64;
    let mut runs = 0u64;
    for (i, (lambda, n_stir)) in [(1.5f64, 10.0f64), (1.2, 100.0)].into_iter().enumerate() {
        let sub = base.substream(format!("case/{i}"));
        for rep in 0..1000u64 {
            runs += 1;
            let stream = sub.substream(format!("rep/{rep}"));
            if evolve_coupled(lambda, n_stir, 2, &[5.0], &CoupledOptions::default(), &stream)
                .is_err()
            {
                violations += 1;
            }
        }
    }
    outcome(
        "coupling-invariants",
        violations == 0,
        format!("{violations} invariant breaches over {runs} coupled runs"),
    )
}

/// Clock-pattern probability: Monte Carlo frequency within 3 se of the
/// closed form at (lambda = 1, N = 100), 1e6 replications.
pub fn criterion_event_e(seed: u64) -> CriterionOutcome {
    let base = SeededStream::new(seed, "accept/event-e");
    let est = estimate_event_e(1.0, 100.0, 1_000_000, &base);
    let want = event_e_probability(1.0, 100.0);
    let pass = (est.mean - want).abs() <= 3.0 * est.std_error;
    outcome(
        "event-e-closed-form",
        pass,
        format!(
            "frequency {:.6} vs formula {:.6} ({:+.2} se)",
            est.mean,
            want,
            (est.mean - want) / est.std_error
        ),
    )
}

/// Collision-pattern symmetry: the two patterns have equal probability
/// (within combined 3 se) and every sampled occurrence leaves the free
/// layer at 3 fresh descendants and the thinned layer at no more than 2.
pub fn criterion_collision_symmetry(seed: u64) -> CriterionOutcome {
    let base = SeededStream::new(seed, "accept/collision");
    let (lambda, n_stir, d) = (1.0, 30.0, 2);
    let n = 1_200_000;
    let i = estimate_event_i(lambda, n_stir, d, n, &base.substream("i"));
    let j = estimate_event_j(lambda, n_stir, d, n, &base.substream("j"));
    let combined = (i.report.std_error.powi(2) + j.report.std_error.powi(2)).sqrt();
    let symmetric = (i.report.mean - j.report.mean).abs() <= 3.0 * combined;
    let audited = i.audit_violations == 0 && j.audit_violations == 0;
    outcome(
        "collision-symmetry",
        symmetric && audited && i.occurrences > 0 && j.occurrences > 0,
        format!(
            "P[I] {:.6e} ({} hits), P[J] {:.6e} ({} hits), gap {:.2} se, audit violations {}/{}",
            i.report.mean,
            i.occurrences,
            j.report.mean,
            j.occurrences,
            (i.report.mean - j.report.mean).abs() / combined,
            i.audit_violations,
            j.audit_violations
        ),
    )
}

/// Mean-population recursion: with the criterion satisfied at
/// (lambda = 1, N = 100), the measured thinned-mean ratio per window
/// step stays below exp(t* (lambda-1)) - 2 P[I] plus 3 combined se for
/// k = 0..5.
pub fn criterion_mean_recursion(seed: u64) -> CriterionOutcome {
    let base = SeededStream::new(seed, "accept/recursion");
    let (lambda, n_stir, d) = (1.0f64, 100.0f64, 2);
    let t_star = collision_window(n_stir);
    let p_i = estimate_event_i(lambda, n_stir, d, 2_000_000, &base.substream("p-i"));
    let bound = (t_star * (lambda - 1.0)).exp() - 2.0 * p_i.report.mean;

    let k_max = 6usize;
    let checkpoints: Vec<f64> = (1..=k_max).map(|k| k as f64 * t_star).collect();
    let n = 150_000u64;
    let sub = base.substream("coupled");
    let counts: Vec<Vec<f64>> = crate::report::run_replications_map(&sub, n, |s| {
        let run = evolve_coupled(lambda, n_stir, d, &checkpoints, &CoupledOptions::default(), s)
            .expect("coupling invariants hold");
        run.thinned_counts.iter().map(|&c| c as f64).collect()
    });
    let mut pass = true;
    let mut details = vec![format!(
        "bound e^(t*(l-1)) - 2P[I] = {:.6} (P[I] = {:.2e})",
        bound, p_i.report.mean
    )];
    // k = 0 compares against the initial population of exactly 1
    let mut prev_mean = 1.0f64;
    let mut prev_se = 0.0f64;
    for (k, _) in checkpoints.iter().enumerate() {
        let col: Vec<f64> = counts.iter().map(|c| c[k]).collect();
        let est = EstimateReport::from_samples(&col);
        let ratio = est.mean / prev_mean;
        let ratio_se = if prev_mean > 0.0 {
            ratio * ((est.std_error / est.mean).powi(2) + (prev_se / prev_mean).powi(2)).sqrt()
        } else {
            f64::INFINITY
        };
        let ok = ratio <= bound + 3.0 * ratio_se;
        pass &= ok;
        details.push(format!("k={}: ratio {:.4} (se {:.4})", k, ratio, ratio_se));
        prev_mean = est.mean;
        prev_se = est.std_error;
    }
    outcome("mean-recursion", pass, details.join("; "))
}

/// The large-N limits themselves are not desk-reproducible (the signal
/// lambda_c - 1 is below Monte Carlo resolution at reachable N); the
/// substitutes are the recursion criterion, the N = 0 bracket inside the
/// rigorous window [4/3, 2], and monotone decrease of the finite-horizon
/// proxy in N over {0, 5, 20}.
pub fn criterion_lambda_c_proxy(seed: u64) -> CriterionOutcome {
    let base = SeededStream::new(seed, "accept/lambda-c");
    let mut brackets = Vec::new();
    for (i, n_stir) in [0.0f64, 5.0, 20.0].into_iter().enumerate() {
        // The horizon must be long enough that subcritical quasi-survival
        // falls below the threshold (at T = 40 even lambda = 1.02 stays
        // above 2%), and the cap high enough that the near-critical
        // branching transient cannot reach it within the horizon: with a
        // cap of 2500 the free branching bound at lambda = 1.05 touches
        // it by t = 100 with ~2% probability, poisoning the proxy.
        // tolerance 0.04 resolves the shrinking spacing of the proxies
        // (the N=5 and N=20 crossings sit ~0.06 apart); probes far from
        // the threshold settle after a couple of batches, so only the
        // 2-3 near-threshold probes per stirring rate run the full
        // replication budget
        let config = LambdaCConfig {
            d: 2,
            n_stir,
            horizon: 100.0,
            pop_cap: 6_000,
            survival_threshold: 0.02,
            tolerance: 0.04,
            reps_per_probe: 1_600,
            lo: 1.0,
            hi: 2.0,
        };
        let bracket = estimate_lambda_c(&config, &base.substream(format!("n/{i}")))
            .expect("bracketing interval");
        brackets.push((n_stir, bracket));
    }
    let n0 = &brackets[0].1;
    let inside = n0.lo >= 4.0 / 3.0 && n0.hi <= 2.0;
    let mids: Vec<f64> = brackets.iter().map(|(_, b)| 0.5 * (b.lo + b.hi)).collect();
    let monotone = mids[0] > mids[1] && mids[1] > mids[2];
    outcome(
        "lambda-c-proxy",
        inside && monotone,
        format!(
            "N=0 bracket [{:.3}, {:.3}] inside [4/3, 2]: {}; proxies {:?} monotone: {} \
             (large-N asymptotics are out of desk reach and not measured)",
            n0.lo, n0.hi, inside, mids, monotone
        ),
    )
}

/// The quadrature and walk-simulation routes to G(0,0) agree to 1e-3.
pub fn criterion_green_cross_check(seed: u64) -> CriterionOutcome {
    let base = SeededStream::new(seed, "accept/green");
    let quadrature = green_constant_d3();
    // 4000 steps puts the analytic tail at ~1e-2 with error well under
    // 1e-5, and the saved steps buy replications: the 1e-3 agreement
    // bar then sits near 3 standard errors.
    let walk = green_walk_estimate(4_000, 6_000_000, &base);
    let pass = (walk.mean - quadrature).abs() <= 1.0e-3;
    outcome(
        "green-constant-cross-check",
        pass,
        format!(
            "quadrature {:.6}, walk {:.6} (se {:.1e}), gap {:.2e}",
            quadrature,
            walk.mean,
            walk.std_error,
            (walk.mean - quadrature).abs()
        ),
    )
}

/// Named bundles for the CLI `suite` subcommand.
pub fn suite_bundle(name: &str, seed: u64) -> Option<Vec<CriterionOutcome>> {
    match name {
        "constants" => Some(vec![
            criterion_excursion_constants(seed),
            criterion_green_cross_check(seed),
            criterion_local_time_d3(seed),
            criterion_ratio_d2(seed),
            criterion_log_slope_d2(seed),
        ]),
        "coupling" => Some(vec![
            criterion_branching_mean(seed),
            criterion_coupling_invariants(seed),
            criterion_event_e(seed),
            criterion_collision_symmetry(seed),
            criterion_mean_recursion(seed),
        ]),
        "renewal" => Some(vec![criterion_renewal_ratios(seed), criterion_gap_bound(seed)]),
        "criterion" => Some(vec![criterion_lambda_c_proxy(seed)]),
        _ => None,
    }
}

pub const SUITE_NAMES: [&str; 4] = ["constants", "coupling", "renewal", "criterion"];
