//! The coupled construction: free branching layer, thinned layer, and
//! the lattice occupancy process, all driven by shared clock families.
//!
//! Three layers evolve together off one set of per-particle clocks and
//! one stirring flow:
//!
//! * the free layer promotes the lowest never-present child on every
//!   birth mark of a present particle (pure branching, no geometry);
//! * every free-present particle has a lattice position, moved by the
//!   shared stirring flow; a newborn is placed on a uniformly random
//!   neighbor of its parent's position;
//! * the thinned layer follows the same marks but suppresses a birth
//!   when the target site is already occupied by a thinned-present
//!   particle (status -1 without ever being present). The occupancy
//!   process reads off the thinned-present positions and is exactly the
//!   contact process with stirring.
//!
//! The structural facts this construction promises are audited at every
//! genealogical event and any breach aborts the run:
//!
//! 1. occupancy is 0/1: no site carries two thinned-present particles;
//! 2. thinned-present is a subset of free-present;
//! 3. for every thinned-present particle, both layers agree on the
//!    lowest never-present child index;
//! 4. a particle's presence interval, when it is ever thinned-present,
//!    is the same in both layers;
//! 5. occupied-site count equals thinned-present count;
//! 6. the stirring engine's incremental edge bookkeeping matches a
//!    recount from scratch.

use std::collections::{BinaryHeap, HashMap};

use thiserror::Error;

use crate::genealogy::branching::{spawn_clocks, ClockKind, ParticleClocks, QueuedEvent};
use crate::genealogy::stirring::StirringEngine;
use crate::genealogy::tree::TreeAddress;
use crate::lattice::{sample_uniform_neighbor, Site};
use crate::stream::SeededStream;

#[derive(Debug, Error)]
#[error("coupling invariant breached at t={time}: {what}")]
pub struct InvariantViolation {
    pub time: f64,
    pub what: String,
}

/// Status of a particle in one layer: 1 present, -1 retired (dead, or
/// birth-blocked in the thinned layer), absent from the map means 0
/// (never present).
type StatusMap = HashMap<TreeAddress, i8>;

#[derive(Clone, Debug)]
pub struct EventRecord {
    pub time: f64,
    pub kind: &'static str,
    pub addr: TreeAddress,
    pub site: Option<Site>,
}

/// Counts of both layers along a checkpoint grid.
#[derive(Clone, Debug)]
pub struct CoupledRun {
    pub checkpoints: Vec<f64>,
    pub free_counts: Vec<u64>,
    pub thinned_counts: Vec<u64>,
    pub truncated: bool,
    /// True when some event time had strictly fewer thinned-present than
    /// free-present particles.
    pub saw_strict_gap: bool,
    pub events: Option<Vec<EventRecord>>,
}

pub struct CoupledOptions {
    pub pop_cap: usize,
    pub record_events: bool,
}

impl Default for CoupledOptions {
    fn default() -> Self {
        CoupledOptions { pop_cap: 100_000, record_events: false }
    }
}

struct CoupledSim<'a> {
    d: usize,
    lambda: f64,
    base: &'a SeededStream,
    engine: StirringEngine,
    free_status: StatusMap,
    thinned_status: StatusMap,
    next_child: HashMap<TreeAddress, u32>,
    clocks: HashMap<TreeAddress, ParticleClocks>,
    queue: BinaryHeap<QueuedEvent>,
    pid_of: HashMap<TreeAddress, u64>,
    addr_of: HashMap<u64, TreeAddress>,
    next_pid: u64,
    free_count: u64,
    thinned_count: u64,
    // presence bookkeeping for the interval-agreement audit
    free_birth_time: HashMap<TreeAddress, f64>,
    thinned_birth_time: HashMap<TreeAddress, f64>,
}

impl<'a> CoupledSim<'a> {
    fn new(d: usize, lambda: f64, n_stir: f64, base: &'a SeededStream) -> Self {
        let engine = StirringEngine::new(d, n_stir, base.substream("stir"));
        let mut sim = CoupledSim {
            d,
            lambda,
            base,
            engine,
            free_status: HashMap::new(),
            thinned_status: HashMap::new(),
            next_child: HashMap::new(),
            clocks: HashMap::new(),
            queue: BinaryHeap::new(),
            pid_of: HashMap::new(),
            addr_of: HashMap::new(),
            next_pid: 0,
            free_count: 0,
            thinned_count: 0,
            free_birth_time: HashMap::new(),
            thinned_birth_time: HashMap::new(),
        };
        let root = TreeAddress::root();
        sim.free_status.insert(root.clone(), 1);
        sim.thinned_status.insert(root.clone(), 1);
        sim.free_birth_time.insert(root.clone(), 0.0);
        sim.thinned_birth_time.insert(root.clone(), 0.0);
        sim.next_child.insert(root.clone(), 1);
        sim.free_count = 1;
        sim.thinned_count = 1;
        sim.track(root.clone(), Site::origin(d));
        let clocks = spawn_clocks(base, &root, lambda, 0.0, &mut sim.queue);
        sim.clocks.insert(root, clocks);
        sim
    }

    fn track(&mut self, addr: TreeAddress, site: Site) {
        let pid = self.next_pid;
        self.next_pid += 1;
        self.pid_of.insert(addr.clone(), pid);
        self.addr_of.insert(pid, addr);
        self.engine.insert(pid, site);
    }

    fn site_occupied_by_thinned(&self, site: &Site) -> bool {
        self.engine
            .occupants(site)
            .iter()
            .any(|pid| self.thinned_status.get(&self.addr_of[pid]) == Some(&1))
    }

    fn handle_death(&mut self, addr: &TreeAddress) {
        self.free_status.insert(addr.clone(), -1);
        self.free_count -= 1;
        if self.thinned_status.get(addr) == Some(&1) {
            self.thinned_status.insert(addr.clone(), -1);
            self.thinned_count -= 1;
        }
        self.clocks.remove(addr);
        let pid = self.pid_of.remove(addr).expect("present particle is tracked");
        self.addr_of.remove(&pid);
        self.engine.remove(pid);
    }

    fn handle_birth(&mut self, addr: &TreeAddress, time: f64) -> (TreeAddress, Site) {
        let n = self.next_child[addr];
        *self.next_child.get_mut(addr).unwrap() = n + 1;
        let child = addr.child(n);

        let parent_pid = self.pid_of[addr];
        let parent_site = self.engine.position(parent_pid).expect("parent has a position");
        let mut disp_stream = self.base.substream(format!("M/{child}"));
        let child_site = parent_site.translate(sample_uniform_neighbor(&mut disp_stream, self.d));

        // thinned layer first: blocking is decided on the occupancy just
        // before the newborn is placed
        if self.thinned_status.get(addr) == Some(&1) {
            if self.site_occupied_by_thinned(&child_site) {
                self.thinned_status.insert(child.clone(), -1);
            } else {
                self.thinned_status.insert(child.clone(), 1);
                self.thinned_birth_time.insert(child.clone(), time);
                self.thinned_count += 1;
            }
        }

        self.free_status.insert(child.clone(), 1);
        self.free_birth_time.insert(child.clone(), time);
        self.free_count += 1;
        self.next_child.insert(child.clone(), 1);
        self.track(child.clone(), child_site);
        let clocks = spawn_clocks(self.base, &child, self.lambda, time, &mut self.queue);
        self.clocks.insert(child.clone(), clocks);

        // parent's next birth mark
        let gap = self
            .clocks
            .get_mut(addr)
            .unwrap()
            .birth_stream
            .first_arrival(self.lambda);
        if gap.is_finite() {
            self.queue.push(QueuedEvent {
                time: time + gap,
                addr: addr.clone(),
                kind: ClockKind::Birth,
            });
        }
        (child, child_site)
    }

    fn lowest_never_present(status: &StatusMap, addr: &TreeAddress) -> u32 {
        let mut n = 1u32;
        loop {
            match status.get(&addr.child(n)) {
                None | Some(0) => return n,
                _ => n += 1,
            }
        }
    }

    fn audit(&self, time: f64) -> Result<(), InvariantViolation> {
        let fail = |what: String| Err(InvariantViolation { time, what });

        // (1) + (5): at most one thinned-present occupant per site, and
        // occupied-site count equals thinned-present count
        let mut occupied_sites = 0u64;
        let mut thinned_seen = 0u64;
        let mut sites_scanned: HashMap<Site, u64> = HashMap::new();
        for (addr, &status) in self.thinned_status.iter() {
            if status != 1 {
                continue;
            }
            thinned_seen += 1;
            let pid = match self.pid_of.get(addr) {
                Some(&p) => p,
                None => return fail(format!("thinned-present {addr} has no tracked position")),
            };
            let site = self.engine.position(pid).unwrap();
            *sites_scanned.entry(site).or_insert(0) += 1;
        }
        for (site, count) in &sites_scanned {
            if *count > 1 {
                return fail(format!("occupancy exceeded 1 at site {site}"));
            }
            occupied_sites += 1;
        }
        if occupied_sites != thinned_seen {
            return fail(format!(
                "occupied sites {occupied_sites} != thinned-present {thinned_seen}"
            ));
        }
        if thinned_seen != self.thinned_count {
            return fail("thinned-present counter drifted".to_string());
        }

        // (2): thinned-present subset of free-present
        for (addr, &status) in self.thinned_status.iter() {
            if status == 1 && self.free_status.get(addr) != Some(&1) {
                return fail(format!("{addr} thinned-present but not free-present"));
            }
        }

        // (3): lowest never-present child agrees on thinned-present particles
        for (addr, &status) in self.thinned_status.iter() {
            if status != 1 {
                continue;
            }
            let nf = Self::lowest_never_present(&self.free_status, addr);
            let nt = Self::lowest_never_present(&self.thinned_status, addr);
            if nf != nt {
                return fail(format!(
                    "next-free-child mismatch at {addr}: free {nf}, thinned {nt}"
                ));
            }
        }

        // (4): presence intervals agree when the thinned layer saw the birth
        for (addr, t_thinned) in self.thinned_birth_time.iter() {
            match self.free_birth_time.get(addr) {
                Some(t_free) if t_free == t_thinned => {}
                other => {
                    return fail(format!(
                        "presence start mismatch at {addr}: thinned {t_thinned:?}, free {other:?}"
                    ))
                }
            }
        }

        // (6): stirring edge bookkeeping
        if self.engine.recount_adjacent_pairs() != self.engine.adjacent_pairs() {
            return fail("stirring adjacency bookkeeping drifted".to_string());
        }

        let free_in_map = self.free_status.values().filter(|&&s| s == 1).count() as u64;
        if free_in_map != self.free_count {
            return fail("free-present counter drifted".to_string());
        }
        Ok(())
    }
}

/// Evolve the coupled construction from one root at the origin, auditing
/// the structural invariants at every genealogical event.
pub fn evolve_coupled(
    lambda: f64,
    n_stir: f64,
    d: usize,
    checkpoints: &[f64],
    options: &CoupledOptions,
    stream: &SeededStream,
) -> Result<CoupledRun, InvariantViolation> {
    assert!(lambda >= 0.0 && n_stir >= 0.0);
    assert!(!checkpoints.is_empty());
    debug_assert!(checkpoints.windows(2).all(|w| w[0] <= w[1]));
    let horizon = *checkpoints.last().unwrap();

    let mut sim = CoupledSim::new(d, lambda, n_stir, stream);
    let mut free_counts = vec![0u64; checkpoints.len()];
    let mut thinned_counts = vec![0u64; checkpoints.len()];
    let mut cp_idx = 0usize;
    let mut truncated = false;
    let mut saw_strict_gap = false;
    let mut events: Option<Vec<EventRecord>> = options.record_events.then(Vec::new);

    sim.audit(0.0)?;

    while let Some(ev) = sim.queue.pop() {
        if ev.time > horizon {
            break;
        }
        if !sim.clocks.contains_key(&ev.addr) {
            continue;
        }
        while cp_idx < checkpoints.len() && checkpoints[cp_idx] < ev.time {
            free_counts[cp_idx] = sim.free_count;
            thinned_counts[cp_idx] = sim.thinned_count;
            cp_idx += 1;
        }
        sim.engine.advance(ev.time);
        match ev.kind {
            ClockKind::Death => {
                let site = sim.engine.position(sim.pid_of[&ev.addr]);
                sim.handle_death(&ev.addr);
                if let Some(log) = events.as_mut() {
                    log.push(EventRecord { time: ev.time, kind: "death", addr: ev.addr.clone(), site });
                }
            }
            ClockKind::Birth => {
                let (child, site) = sim.handle_birth(&ev.addr, ev.time);
                if let Some(log) = events.as_mut() {
                    let kind = match sim.thinned_status.get(&child) {
                        Some(&1) => "birth",
                        Some(&-1) if sim.thinned_status.get(&ev.addr) == Some(&1) => "birth-blocked",
                        _ => "birth-free-only",
                    };
                    log.push(EventRecord { time: ev.time, kind, addr: child, site: Some(site) });
                }
                if sim.free_count as usize > options.pop_cap {
                    truncated = true;
                }
            }
        }
        sim.audit(ev.time)?;
        if sim.thinned_count < sim.free_count {
            saw_strict_gap = true;
        }
        if truncated {
            break;
        }
    }

    while cp_idx < checkpoints.len() {
        free_counts[cp_idx] = sim.free_count;
        thinned_counts[cp_idx] = sim.thinned_count;
        cp_idx += 1;
    }

    Ok(CoupledRun {
        checkpoints: checkpoints.to_vec(),
        free_counts,
        thinned_counts,
        truncated,
        saw_strict_gap,
        events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genealogy::branching::evolve_psi;
    use crate::report::{run_replications, EstimateReport};

    #[test]
    fn free_layer_matches_branching_simulator_pathwise() {
        // The free layer never feels the flow, so with a shared base
        // stream the coupled run's free counts replay evolve_psi exactly.
        let base = SeededStream::new(10, "coupled-vs-psi");
        let checkpoints = [0.5, 1.0, 2.0, 3.0];
        for i in 0..100 {
            let rep = base.substream(format!("rep/{i}"));
            let coupled = evolve_coupled(
                1.4,
                5.0,
                2,
                &checkpoints,
                &CoupledOptions::default(),
                &rep,
            )
            .expect("invariants hold");
            let free = evolve_psi(1.4, &checkpoints, 100_000, &rep);
            assert_eq!(coupled.free_counts, free.counts);
        }
    }

    #[test]
    fn thinned_never_exceeds_free_and_gaps_occur() {
        let base = SeededStream::new(11, "gap");
        let checkpoints = [3.0];
        let mut strict = 0u32;
        for i in 0..300 {
            let rep = base.substream(format!("rep/{i}"));
            let run =
                evolve_coupled(1.5, 10.0, 2, &checkpoints, &CoupledOptions::default(), &rep)
                    .expect("invariants hold");
            assert!(run.thinned_counts[0] <= run.free_counts[0]);
            if run.saw_strict_gap {
                strict += 1;
            }
        }
        assert!(
            strict > 30,
            "collisions should thin a positive fraction of runs, got {strict}/300"
        );
    }

    #[test]
    fn rapid_stirring_closes_the_gap_toward_the_branching_mean() {
        let lambda = 1.2;
        let t = 3.0;
        let base = SeededStream::new(12, "rarefy");
        let mean_thinned = |n_stir: f64, label: &str| {
            let samples = run_replications(&base.substream(label), 3000, |s| {
                evolve_coupled(lambda, n_stir, 2, &[t], &CoupledOptions::default(), s)
                    .expect("invariants hold")
                    .thinned_counts[0] as f64
            });
            EstimateReport::from_samples(&samples)
        };
        let slow = mean_thinned(1.0, "slow");
        let fast = mean_thinned(1000.0, "fast");
        let branching = ((lambda - 1.0) * t).exp();
        assert!(
            fast.mean > slow.mean + 2.0 * (fast.std_error + slow.std_error),
            "faster stirring must rarefy collisions: slow {} fast {}",
            slow.mean,
            fast.mean
        );
        assert!(
            (branching - fast.mean) < 0.1 * branching,
            "at N=1000 the thinned mean {} should approach {}",
            fast.mean,
            branching
        );
        assert!(fast.mean < branching + 3.0 * fast.std_error);
    }

    #[test]
    fn zero_stirring_still_satisfies_invariants() {
        let base = SeededStream::new(13, "frozen");
        for i in 0..200 {
            let rep = base.substream(format!("rep/{i}"));
            evolve_coupled(2.0, 0.0, 2, &[4.0], &CoupledOptions::default(), &rep)
                .expect("invariants hold with frozen particles");
        }
    }

    #[test]
    fn event_log_records_blocked_births() {
        let base = SeededStream::new(14, "log");
        let opts = CoupledOptions { pop_cap: 100_000, record_events: true };
        let mut blocked = 0usize;
        for i in 0..200 {
            let rep = base.substream(format!("rep/{i}"));
            let run = evolve_coupled(2.0, 1.0, 1, &[3.0], &opts, &rep).unwrap();
            blocked += run
                .events
                .unwrap()
                .iter()
                .filter(|e| e.kind == "birth-blocked")
                .count();
        }
        assert!(blocked > 0, "d=1 slow stirring must block some births");
    }
}
