//! Direct continuous-time simulation of the contact process with
//! stirring, straight from the generator: each particle dies at rate 1
//! and attempts a birth on a uniform neighbor at rate lambda (void if
//! the target is occupied); every edge incident to a particle rings at
//! rate N and swaps its endpoint contents. Rings between two empty sites
//! change nothing and are never scheduled.
//!
//! The lattice is unbounded: the configuration is a sparse set over
//! 64-bit coordinates, so finite populations never meet a boundary.

use std::collections::HashMap;

use thiserror::Error;

use crate::lattice::Site;
use crate::report::{run_replications_map, EstimateReport};
use crate::stream::SeededStream;

#[derive(Debug, Error, PartialEq)]
pub enum ContactError {
    #[error("initial interval [{lo}, {hi}] does not bracket the survival threshold: p({lo}) = {p_lo}, p({hi}) = {p_hi}")]
    NonBracketing { lo: f64, hi: f64, p_lo: f64, p_hi: f64 },
}

/// Sparse configuration with O(1) uniform particle sampling and
/// incremental adjacency bookkeeping.
pub struct Configuration {
    d: usize,
    sites: Vec<Site>,
    index: HashMap<Site, usize>,
    /// Unordered occupied-occupied adjacent pairs.
    adjacent_pairs: u64,
    pub time: f64,
}

impl Configuration {
    pub fn single_particle_at_origin(d: usize) -> Self {
        let mut cfg = Configuration {
            d,
            sites: Vec::new(),
            index: HashMap::new(),
            adjacent_pairs: 0,
            time: 0.0,
        };
        cfg.insert(Site::origin(d));
        cfg
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn contains(&self, site: &Site) -> bool {
        self.index.contains_key(site)
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    fn occupied_neighbors(&self, site: &Site) -> u64 {
        (0..2 * self.d)
            .filter(|&k| self.index.contains_key(&site.step(k)))
            .count() as u64
    }

    fn insert(&mut self, site: Site) {
        debug_assert!(!self.index.contains_key(&site));
        self.adjacent_pairs += self.occupied_neighbors(&site);
        self.index.insert(site, self.sites.len());
        self.sites.push(site);
    }

    fn remove(&mut self, site: &Site) {
        let idx = self.index.remove(site).expect("site occupied");
        let last = self.sites.len() - 1;
        self.sites.swap_remove(idx);
        if idx != last {
            self.index.insert(self.sites[idx], idx);
        }
        self.adjacent_pairs -= self.occupied_neighbors(site);
    }

    /// Edges incident to at least one particle; a shared edge counts once.
    pub fn active_edges(&self) -> u64 {
        2 * self.d as u64 * self.sites.len() as u64 - self.adjacent_pairs
    }

    pub fn recount_adjacent_pairs(&self) -> u64 {
        self.sites.iter().map(|s| self.occupied_neighbors(s)).sum::<u64>() / 2
    }

    pub fn adjacent_pairs(&self) -> u64 {
        self.adjacent_pairs
    }
}

/// Total event rate: `n (1 + lambda) + N * active_edges`.
pub fn total_rate(cfg: &Configuration, lambda: f64, n_stir: f64) -> f64 {
    cfg.len() as f64 * (1.0 + lambda) + n_stir * cfg.active_edges() as f64
}

/// One Gillespie step: exponential holding time at the total rate, event
/// chosen proportionally (death, birth attempt, or stirring ring).
/// Births onto occupied sites and rings over doubly-occupied edges leave
/// the configuration unchanged. Returns the holding time.
pub fn step(cfg: &mut Configuration, lambda: f64, n_stir: f64, stream: &mut SeededStream) -> f64 {
    assert!(!cfg.is_empty(), "the empty configuration is absorbing; stepping it is a contract violation");
    let d = cfg.d;
    let n = cfg.len() as f64;
    let rate = total_rate(cfg, lambda, n_stir);
    let dt = stream.exponential(rate);
    cfg.time += dt;

    let u = stream.u01() * rate;
    if u < n {
        // death of a uniform particle
        let victim = cfg.sites[stream.uniform_index(cfg.len())];
        cfg.remove(&victim);
    } else if u < n * (1.0 + lambda) {
        // birth attempt from a uniform particle onto a uniform neighbor
        let parent = cfg.sites[stream.uniform_index(cfg.len())];
        let target = parent.step(stream.uniform_index(2 * d));
        if !cfg.contains(&target) {
            cfg.insert(target);
        }
    } else {
        // stirring ring on a uniform active edge: pick a uniform
        // (particle site, direction) slot; an edge with both endpoints
        // occupied owns two slots and is accepted with probability 1/2,
        // which leaves the ring choice uniform over active edges
        loop {
            let slot = stream.uniform_index(cfg.len() * 2 * d);
            let from = cfg.sites[slot / (2 * d)];
            let to = from.step(slot % (2 * d));
            if cfg.contains(&to) {
                if stream.next_u64() & 1 == 0 {
                    continue;
                }
                // both occupied: swapping the contents changes nothing
                break;
            }
            cfg.remove(&from);
            cfg.insert(to);
            break;
        }
    }
    dt
}

/// Why a survival replication ended.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum RunOutcome {
    Extinct,
    AliveAtHorizon,
    HitPopulationCap,
}

/// Run one trajectory from a single particle at the origin until
/// extinction, the horizon, or the population cap.
pub fn run_survival_trial(
    lambda: f64,
    n_stir: f64,
    d: usize,
    horizon: f64,
    pop_cap: usize,
    stream: &mut SeededStream,
) -> RunOutcome {
    let mut cfg = Configuration::single_particle_at_origin(d);
    loop {
        if cfg.len() >= pop_cap {
            return RunOutcome::HitPopulationCap;
        }
        if cfg.is_empty() {
            return RunOutcome::Extinct;
        }
        let before = cfg.time;
        let _ = step(&mut cfg, lambda, n_stir, stream);
        if cfg.time > horizon {
            // the event landed past the horizon; the pre-event population
            // was alive there
            let _ = before;
            return RunOutcome::AliveAtHorizon;
        }
    }
}

/// Survival estimate with both censoring rules reported: a replication
/// counts as surviving when it is alive at the horizon or has hit the
/// population cap (the cap fraction is reported separately).
pub struct SurvivalEstimate {
    pub report: EstimateReport,
    pub cap_fraction: f64,
    pub alive_fraction: f64,
}

pub fn survival_probability(
    lambda: f64,
    n_stir: f64,
    d: usize,
    horizon: f64,
    pop_cap: usize,
    n_reps: u64,
    stream: &SeededStream,
) -> SurvivalEstimate {
    let outcomes: Vec<RunOutcome> = run_replications_map(stream, n_reps, |s| {
        run_survival_trial(lambda, n_stir, d, horizon, pop_cap, s)
    });
    let samples: Vec<f64> = outcomes
        .iter()
        .map(|o| if *o == RunOutcome::Extinct { 0.0 } else { 1.0 })
        .collect();
    let cap = outcomes.iter().filter(|o| **o == RunOutcome::HitPopulationCap).count();
    let alive = outcomes.iter().filter(|o| **o == RunOutcome::AliveAtHorizon).count();
    let report = EstimateReport::from_samples(&samples)
        .with_extra("horizon", horizon)
        .with_extra("pop_cap", pop_cap as f64);
    SurvivalEstimate {
        report,
        cap_fraction: cap as f64 / n_reps as f64,
        alive_fraction: alive as f64 / n_reps as f64,
    }
}

/// One bisection probe.
#[derive(Clone, Debug)]
pub struct ProbeRecord {
    pub lambda: f64,
    pub survival: f64,
    pub std_error: f64,
    pub n_reps: u64,
    pub above_threshold: bool,
}

/// Bracketing interval for the finite-horizon survival-threshold proxy
/// of the critical birth rate, with the probe log.
#[derive(Clone, Debug)]
pub struct LambdaCBracket {
    pub lo: f64,
    pub hi: f64,
    pub probes: Vec<ProbeRecord>,
}

pub struct LambdaCConfig {
    pub d: usize,
    pub n_stir: f64,
    pub horizon: f64,
    pub pop_cap: usize,
    pub survival_threshold: f64,
    pub tolerance: f64,
    pub reps_per_probe: u64,
    pub lo: f64,
    pub hi: f64,
}

impl Default for LambdaCConfig {
    fn default() -> Self {
        LambdaCConfig {
            d: 2,
            n_stir: 0.0,
            horizon: 50.0,
            pop_cap: 10_000,
            survival_threshold: 0.02,
            tolerance: 0.05,
            reps_per_probe: 2000,
            lo: 1.0,
            hi: 3.0,
        }
    }
}

/// Bisection on lambda of `survival >= threshold`, with a sequential
/// early stop once the probe's 3-se interval excludes the threshold.
///
/// This estimates a finite-horizon proxy, not the true critical value:
/// the infinite-time survival event is approximated by (alive at the
/// horizon or population cap hit), and both knobs are reported.
pub fn estimate_lambda_c(
    config: &LambdaCConfig,
    stream: &SeededStream,
) -> Result<LambdaCBracket, ContactError> {
    assert!(config.tolerance > 0.0);
    assert!(config.survival_threshold < 1.0);
    let mut probes = Vec::new();

    if config.survival_threshold <= 0.0 {
        // every birth rate has survival probability >= 0
        return Ok(LambdaCBracket { lo: config.lo, hi: config.lo, probes });
    }

    let probe = |lambda: f64, label: &str, probes: &mut Vec<ProbeRecord>| -> bool {
        // sequential batches with early stop once 3 se separates the
        // estimate from the threshold; probes far from the threshold
        // (where survivors are expensive to simulate) settle after a
        // couple of batches
        let batch = 100u64.min(config.reps_per_probe.max(1));
        let min_total = (2 * batch).min(config.reps_per_probe);
        let mut survived = 0u64;
        let mut total = 0u64;
        let base = stream.substream(label);
        let mut batch_idx = 0u64;
        while total < config.reps_per_probe {
            let todo = batch.min(config.reps_per_probe - total);
            let sub = base.substream(format!("batch/{batch_idx}"));
            let outcomes: Vec<RunOutcome> = run_replications_map(&sub, todo, |s| {
                run_survival_trial(
                    lambda,
                    config.n_stir,
                    config.d,
                    config.horizon,
                    config.pop_cap,
                    s,
                )
            });
            survived += outcomes.iter().filter(|o| **o != RunOutcome::Extinct).count() as u64;
            total += todo;
            batch_idx += 1;
            let p = survived as f64 / total as f64;
            let se = (p * (1.0 - p) / total as f64).sqrt().max(1.0 / total as f64);
            if total >= min_total && (p - config.survival_threshold).abs() > 3.0 * se {
                break;
            }
        }
        let p = survived as f64 / total as f64;
        let se = (p * (1.0 - p) / total as f64).sqrt();
        let above = p >= config.survival_threshold;
        probes.push(ProbeRecord {
            lambda,
            survival: p,
            std_error: se,
            n_reps: total,
            above_threshold: above,
        });
        above
    };

    let lo_above = probe(config.lo, &format!("probe/lo/{}", config.lo), &mut probes);
    let hi_above = probe(config.hi, &format!("probe/hi/{}", config.hi), &mut probes);
    if lo_above || !hi_above {
        let (p_lo, p_hi) = (probes[0].survival, probes[1].survival);
        return Err(ContactError::NonBracketing {
            lo: config.lo,
            hi: config.hi,
            p_lo,
            p_hi,
        });
    }

    let mut lo = config.lo;
    let mut hi = config.hi;
    let mut k = 0u32;
    while hi - lo > config.tolerance {
        let mid = 0.5 * (lo + hi);
        let above = probe(mid, &format!("probe/{k}/{mid}"), &mut probes);
        if above {
            hi = mid;
        } else {
            lo = mid;
        }
        k += 1;
    }
    Ok(LambdaCBracket { lo, hi, probes })
}

/// Asymptotic lower bound on the critical birth rate for large stirring:
/// `1 + (G(0,0) - 1)/(2 d N)` in d = 3 and `1 + log N / (4 pi N)` in
/// d = 2.
pub fn asymptotic_lower_bound(d: usize, n_stir: f64) -> f64 {
    assert!(d == 2 || d == 3, "the bound is stated for d in {{2, 3}}");
    assert!(n_stir > std::f64::consts::E);
    match d {
        3 => 1.0 + (crate::green::green_constant_d3() - 1.0) / (6.0 * n_stir),
        _ => 1.0 + n_stir.ln() / (4.0 * std::f64::consts::PI * n_stir),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::run_replications;

    #[test]
    fn lone_particle_lifetime_is_unit_exponential() {
        let base = SeededStream::new(60, "life");
        let n = 200_000;
        let samples = run_replications(&base, n, |s| {
            let mut cfg = Configuration::single_particle_at_origin(2);
            let dt = step(&mut cfg, 0.0, 0.0, s);
            assert!(cfg.is_empty(), "with lambda = N = 0 the only event is death");
            dt
        });
        let r = EstimateReport::from_samples(&samples);
        assert!((r.mean - 1.0).abs() < 3.0 * r.std_error, "mean lifetime {}", r.mean);
    }

    #[test]
    fn lone_stirred_particle_matches_direct_walk() {
        // Stirring a lone particle is free motion at rate 2dN. The
        // particle still dies at rate 1, independently of the motion, so
        // condition on being alive at t and compare the position law with
        // a direct rate-2dN walk (two-sample chi-square on the L1 norm).
        let d = 2;
        let n_stir = 4.0;
        let t = 1.25;
        let n = 120_000;
        let base = SeededStream::new(61, "lonestir");
        let via_contact: Vec<f64> = run_replications(&base.substream("contact"), n, |s| {
            let mut cfg = Configuration::single_particle_at_origin(d);
            loop {
                if cfg.is_empty() {
                    return -1.0; // died before t: discard
                }
                let pos = cfg.sites()[0];
                let before = cfg.time;
                step(&mut cfg, 0.0, n_stir, s);
                let _ = before;
                if cfg.time > t {
                    return pos.l1_norm() as f64;
                }
            }
        });
        let direct = run_replications(&base.substream("walk"), n / 3, |s| {
            let rate = (2 * d) as f64 * n_stir;
            let mut pos = Site::origin(d);
            let mut clock = 0.0;
            loop {
                clock += s.exponential(rate);
                if clock > t {
                    return pos.l1_norm() as f64;
                }
                pos = pos.step(s.uniform_index(2 * d));
            }
        });
        let alive: Vec<f64> = via_contact.into_iter().filter(|&v| v >= 0.0).collect();
        assert!(alive.len() > 20_000, "not enough survivors: {}", alive.len());

        let bin = |v: f64| (v as usize).min(10);
        let mut ca = [0f64; 11];
        let mut cb = [0f64; 11];
        for &v in &alive {
            ca[bin(v)] += 1.0;
        }
        for &v in &direct {
            cb[bin(v)] += 1.0;
        }
        let (na, nb) = (alive.len() as f64, direct.len() as f64);
        let mut chi2 = 0.0;
        for i in 0..11 {
            let tot = ca[i] + cb[i];
            if tot < 10.0 {
                continue;
            }
            // two-sample chi-square with unequal sizes
            let ea = tot * na / (na + nb);
            let eb = tot * nb / (na + nb);
            chi2 += (ca[i] - ea).powi(2) / ea + (cb[i] - eb).powi(2) / eb;
        }
        // 0.999 quantile of chi-square with 10 dof is 29.59
        assert!(chi2 < 29.59, "conditioned position law mismatch: chi2 = {chi2}");
    }

    #[test]
    fn adjacent_pair_rings_never_create_or_destroy_particles() {
        let mut cfg = Configuration::single_particle_at_origin(2);
        cfg.insert(Site::new(&[1, 0]));
        assert_eq!(cfg.active_edges(), 7, "shared edge must be counted once");
        // With lambda = 0 and overwhelming stirring, nearly every event is
        // a ring. Rings move or (over a doubly-occupied edge) swap, so the
        // particle count is preserved until a death fires, and every
        // configuration along the way stays consistent.
        let mut s = SeededStream::new(62, "swap");
        let mut no_op_steps = 0u32;
        for _ in 0..2000 {
            let n_before = cfg.len();
            let before: std::collections::BTreeSet<Site> = cfg.sites().iter().copied().collect();
            step(&mut cfg, 0.0, 1000.0, &mut s);
            if cfg.len() < n_before {
                break; // death
            }
            assert_eq!(cfg.len(), n_before, "a ring cannot change the particle count");
            let after: std::collections::BTreeSet<Site> = cfg.sites().iter().copied().collect();
            if after == before {
                no_op_steps += 1; // ring over the doubly-occupied edge
            }
            assert_eq!(cfg.recount_adjacent_pairs(), cfg.adjacent_pairs());
        }
        assert!(
            no_op_steps > 0,
            "adjacent particles under heavy stirring must see set-preserving swaps"
        );
    }

    #[test]
    fn rate_bookkeeping_stays_exact_over_a_long_run() {
        let mut s = SeededStream::new(63, "rates");
        let mut cfg = Configuration::single_particle_at_origin(2);
        let (lambda, n_stir) = (2.0, 3.0);
        for _ in 0..20_000 {
            if cfg.is_empty() {
                break;
            }
            step(&mut cfg, lambda, n_stir, &mut s);
            assert_eq!(
                cfg.recount_adjacent_pairs(),
                cfg.adjacent_pairs(),
                "incremental adjacency drifted from scratch recount"
            );
        }
    }

    #[test]
    #[should_panic(expected = "absorbing")]
    fn stepping_the_empty_configuration_is_rejected() {
        let mut s = SeededStream::new(64, "empty");
        let mut cfg = Configuration::single_particle_at_origin(2);
        step(&mut cfg, 0.0, 0.0, &mut s); // the death
        step(&mut cfg, 0.0, 0.0, &mut s); // contract violation
    }

    #[test]
    fn pure_death_survival_vanishes() {
        let base = SeededStream::new(65, "surv0");
        let est = survival_probability(0.0, 0.0, 2, 10.0, 10_000, 20_000, &base);
        assert!(
            est.report.mean < 5.0e-4,
            "survival at t=10 with lambda=0 is e^-10, got {}",
            est.report.mean
        );
        assert_eq!(est.cap_fraction, 0.0);
    }

    #[test]
    fn supercritical_survival_is_bounded_away_from_zero() {
        let base = SeededStream::new(66, "surv5");
        let est = survival_probability(5.0, 0.0, 2, 20.0, 2_000, 500, &base);
        assert!(
            est.report.mean > 0.3,
            "lambda=5 is far above critical in d=2, got {}",
            est.report.mean
        );
    }

    #[test]
    fn survival_is_monotone_in_lambda_statistically() {
        let base = SeededStream::new(67, "mono");
        let grid = [0.5, 1.2, 2.0, 3.5];
        let mut last = -1.0f64;
        for (i, &lambda) in grid.iter().enumerate() {
            let est = survival_probability(
                lambda,
                0.0,
                2,
                15.0,
                5_000,
                3_000,
                &base.substream(format!("l/{i}")),
            );
            assert!(
                est.report.mean >= last - 3.0 * est.report.std_error,
                "survival dropped along the lambda grid at {lambda}"
            );
            last = est.report.mean;
        }
    }

    #[test]
    fn degenerate_threshold_returns_lower_endpoint() {
        let s = SeededStream::new(68, "deg");
        let config = LambdaCConfig {
            survival_threshold: 0.0,
            lo: 1.25,
            hi: 2.0,
            ..Default::default()
        };
        let bracket = estimate_lambda_c(&config, &s).unwrap();
        assert_eq!((bracket.lo, bracket.hi), (1.25, 1.25));
    }

    #[test]
    fn non_bracketing_interval_is_an_error() {
        let s = SeededStream::new(69, "nobracket");
        let config = LambdaCConfig {
            lo: 4.0,
            hi: 6.0,
            horizon: 10.0,
            reps_per_probe: 400,
            ..Default::default()
        };
        assert!(matches!(
            estimate_lambda_c(&config, &s),
            Err(ContactError::NonBracketing { .. })
        ));
    }

    #[test]
    fn lower_bound_reference_values() {
        let d3 = asymptotic_lower_bound(3, 100.0);
        assert!((d3 - 1.000861).abs() < 2e-6, "d=3 N=100 bound {d3}");
        let e2 = std::f64::consts::E * std::f64::consts::E;
        let d2 = asymptotic_lower_bound(2, e2);
        assert!((d2 - 1.0215402).abs() < 1e-6, "d=2 N=e^2 bound {d2}");
        for n in [50.0, 500.0, 5_000.0, 50_000.0] {
            assert!(asymptotic_lower_bound(2, n * 10.0) < asymptotic_lower_bound(2, n));
            assert!(asymptotic_lower_bound(3, n * 10.0) < asymptotic_lower_bound(3, n));
        }
    }
}
